#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hsd/matrix.hpp"
#include "hsd/sbv_field.hpp"

namespace hsd {

/// Closed forms for the recursion started from a convex bulk density with
/// the trace-type interfacial density |lambda . nu| (square matrices only).
/// Ground truth for the solver and hierarchy tests.
namespace oracle {

using ConvexBulk = std::function<double(const Matrix&)>;

/// Stage-k relaxed bulk density:
///   |tr(A - B_k)| + sum_{j=2..k} |tr(B_j - B_{j-1})| + W0(B_1),
/// with the tuple passed innermost-first: {B_k, ..., B_1}.
inline double exact_Wk(const Matrix& A, const std::vector<Matrix>& B_tuple, const ConvexBulk& W0) {
    if (A.rows() != A.cols()) throw std::invalid_argument("exact_Wk: d != N");
    if (B_tuple.empty()) throw std::invalid_argument("exact_Wk: tuple must have length >= 1");
    for (const auto& B : B_tuple)
        if (!B.same_shape(A)) throw std::invalid_argument("exact_Wk: shape mismatch");
    double v = std::abs((A - B_tuple.front()).trace());
    for (std::size_t j = 0; j + 1 < B_tuple.size(); ++j)
        v += std::abs((B_tuple[j] - B_tuple[j + 1]).trace());
    v += W0(B_tuple.back());
    return v;
}

/// Stage-k surface density: unchanged at every stage.
inline double exact_psik(const Vec& lambda, const Vec& nu) { return std::abs(dot(lambda, nu)); }

/// Fully relaxed hierarchical energy: exact quadrature of
///   sum_l |tr(G_l - G_{l-1})| + W0(G_L)   (G_0 := grad g, constant per cell)
/// plus the jump term sum over faces of |[g] . nu_g|.
inline double exact_E1(const SBVField& g, const std::vector<std::vector<Matrix>>& G_levels,
                       const ConvexBulk& W0) {
    const Grid& grid = g.grid();
    if (g.value_dim() != grid.dim()) throw std::invalid_argument("exact_E1: d != N");
    const int m = grid.cell_count();
    for (const auto& lvl : G_levels)
        if (static_cast<int>(lvl.size()) != m)
            throw std::invalid_argument("exact_E1: level not sampled on the grid");
    double bulk = 0.0;
    for (int c = 0; c < m; ++c) {
        const double vol = grid.cell(c).volume;
        Matrix prev = g.slope(c); // G_0
        double density = 0.0;
        for (const auto& lvl : G_levels) {
            density += std::abs((lvl[static_cast<std::size_t>(c)] - prev).trace());
            prev = lvl[static_cast<std::size_t>(c)];
        }
        density += W0(prev);
        bulk += vol * density;
    }
    double surf = 0.0;
    Vec j0, j1;
    for (const Face& f : grid.interior_faces()) {
        g.face_jump(f, j0, j1);
        const Vec nu = grid.to_physical(f.normal);
        surf += f.measure * quadrature::abs_affine(dot(j0, nu), dot(j1, nu));
    }
    return bulk + surf;
}

} // namespace oracle
} // namespace hsd

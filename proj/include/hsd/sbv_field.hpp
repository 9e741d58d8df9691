#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hsd/density.hpp"
#include "hsd/grid.hpp"
#include "hsd/matrix.hpp"

namespace hsd {

namespace quadrature {

// Gauss-Legendre nodes/weights on [0,1].
inline const double g2_nodes[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
inline const double g2_weights[2] = {0.5, 0.5};

inline const double g4_nodes[4] = {0.06943184420297371, 0.33000947820757187, 0.6699905217924281,
                                   0.9305681557970262};
inline const double g4_weights[4] = {0.17392742256872693, 0.32607257743127305, 0.32607257743127305,
                                     0.17392742256872693};

/// Exact integral of |a + s b| over s in [0,1] for scalars.
inline double abs_affine(double a, double b) {
    if (std::abs(b) < 1e-300) return std::abs(a);
    const double root = -a / b;
    auto F = [&](double s) { return a * s + 0.5 * b * s * s; };
    if (root <= 0.0 || root >= 1.0) return std::abs(F(1.0));
    return std::abs(F(root)) + std::abs(F(1.0) - F(root));
}

/// Exact integral of the Euclidean norm |a + s b| over s in [0,1].
inline double norm_affine(const Vec& a, const Vec& b) {
    const double bb = dot(b, b);
    if (bb < 1e-300) return norm(a);
    const double ab = dot(a, b);
    const double aa = dot(a, a);
    const double disc = aa * bb - ab * ab; // >= 0 by Cauchy-Schwarz
    if (disc <= 1e-28 * aa * bb) {
        // collinear: |a + s b| = |b| |s - s0|
        const double s0 = -ab / bb;
        const double nb = std::sqrt(bb);
        auto F = [&](double s) { return 0.5 * (s - s0) * std::abs(s - s0); };
        if (s0 <= 0.0 || s0 >= 1.0) return nb * std::abs(F(1.0) - F(0.0));
        return nb * (std::abs(F(0.0)) + std::abs(F(1.0)));
    }
    // antiderivative of sqrt(bb s^2 + 2 ab s + aa)
    const double c = disc / bb;
    const double nb = std::sqrt(bb);
    auto F = [&](double s) {
        const double t = s + ab / bb;
        const double q = std::sqrt(t * t + c / bb);
        return 0.5 * nb * (t * q + (c / bb) * std::log(t + q));
    };
    return F(1.0) - F(0.0);
}

} // namespace quadrature

/// The energy of a field, split into its two terms.
struct EnergyBreakdown {
    double bulk_value = 0.0;
    double surface_value = 0.0;
    double total = 0.0;
    std::vector<double> per_face;
};

/// Broken piecewise-affine field on a Grid: one affine piece per cell, the
/// offset being the value at the cell centroid (physical coordinates). Jump
/// data on interior faces is implied by the traces of the adjacent pieces.
class SBVField {
public:
    SBVField() : SBVField(Grid(), 1) {}

    SBVField(Grid grid, int d) : grid_(std::move(grid)), d_(d) {
        if (d_ < 1) throw std::invalid_argument("SBVField: d must be positive");
        const int m = grid_.cell_count();
        offsets_.assign(static_cast<std::size_t>(m), Vec(static_cast<std::size_t>(d_), 0.0));
        slopes_.assign(static_cast<std::size_t>(m), Matrix(d_, grid_.dim()));
        centroids_.reserve(static_cast<std::size_t>(m));
        for (int c = 0; c < m; ++c) centroids_.push_back(grid_.to_physical(grid_.cell(c).centroid));
    }

    const Grid& grid() const { return grid_; }
    int value_dim() const { return d_; }

    const Vec& offset(int c) const { return offsets_[static_cast<std::size_t>(c)]; }
    Vec& offset(int c) { return offsets_[static_cast<std::size_t>(c)]; }
    const Matrix& slope(int c) const { return slopes_[static_cast<std::size_t>(c)]; }
    Matrix& slope(int c) { return slopes_[static_cast<std::size_t>(c)]; }
    const Vec& centroid(int c) const { return centroids_[static_cast<std::size_t>(c)]; }

    /// Value of the affine piece of cell c at a physical point.
    Vec piece_value(int c, const Vec& x_phys) const {
        return offset(c) + slope(c).apply(x_phys - centroid(c));
    }

    /// Value at a reference point (cells are located by the grid rule).
    Vec value_at_ref(const Vec& ref) const {
        const int c = grid_.locate(ref);
        return piece_value(c, grid_.to_physical(ref));
    }

    bool finite() const {
        for (const auto& o : offsets_)
            for (double v : o)
                if (!std::isfinite(v)) return false;
        for (const auto& s : slopes_)
            if (!s.finite()) return false;
        return true;
    }

    /// Trace difference u_plus - u_minus along a face, as an affine function
    /// of the arclength parameter s in [0,1]: jump(s) = j0 + s j1.
    void face_jump(const Face& f, Vec& j0, Vec& j1) const {
        const Vec pa = grid_.to_physical(f.a);
        const Vec pb = grid_.to_physical(f.b);
        const Vec ja = piece_value(f.plus, pa) - piece_value(f.minus, pa);
        const Vec jb = piece_value(f.plus, pb) - piece_value(f.minus, pb);
        j0 = ja;
        j1 = jb - ja;
    }

private:
    Grid grid_;
    int d_;
    std::vector<Vec> offsets_;
    std::vector<Matrix> slopes_;
    std::vector<Vec> centroids_;
};

/// The affine field a_A(x) = A x (zero jumps).
inline SBVField affine_field(const Grid& grid, const Matrix& A) {
    if (A.cols() != grid.dim()) throw std::invalid_argument("affine_field: shape mismatch");
    SBVField u(grid, A.rows());
    for (int c = 0; c < grid.cell_count(); ++c) {
        u.slope(c) = A;
        u.offset(c) = A.apply(u.centroid(c));
    }
    return u;
}

/// The two-valued field s_{lambda,mu,nu}: lambda where x . nu >= 0, mu
/// elsewhere; zero slope, single planar jump through the origin.
inline SBVField step_field(const Grid& grid, const Vec& lambda, const Vec& mu, const Vec& nu) {
    if (std::abs(norm(nu) - 1.0) > 1e-12) throw std::invalid_argument("step_field: nu must be unit");
    if (lambda.size() != mu.size()) throw std::invalid_argument("step_field: lambda/mu mismatch");
    SBVField u(grid, static_cast<int>(lambda.size()));
    for (int c = 0; c < grid.cell_count(); ++c)
        u.offset(c) = (dot(u.centroid(c), nu) >= 0.0) ? lambda : mu;
    return u;
}

/// Surface-energy contribution of one interior face. Trace-type densities
/// are integrated in closed form; everything else with 2-point Gauss.
inline double face_contribution(const SBVField& u, const Face& f, const DensityPair& pair,
                                const std::optional<Vec>& x_frozen) {
    const Grid& g = u.grid();
    Vec j0, j1;
    u.face_jump(f, j0, j1);
    const Vec nu = g.to_physical(f.normal);
    if (pair.surface_trace_type && (x_frozen || !pair.surface_x_dependent)) {
        const Vec x = x_frozen ? *x_frozen : Vec(g.to_physical(f.a));
        // psi = c |lambda . nu| with c recovered from one evaluation
        const double scale = pair.eval_surface(x, nu, nu); // c |nu.nu| = c
        return f.measure * scale * quadrature::abs_affine(dot(j0, nu), dot(j1, nu));
    }
    const Vec pa = g.to_physical(f.a);
    const Vec pb = g.to_physical(f.b);
    double contrib = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double s = quadrature::g2_nodes[k];
        const Vec x = x_frozen ? *x_frozen : Vec(pa + s * (pb - pa));
        contrib += f.measure * quadrature::g2_weights[k] * pair.eval_surface(x, j0 + s * j1, nu);
    }
    return contrib;
}

/// Energy of a field under a density pair. With `x_frozen` the densities are
/// evaluated at that fixed point (cell-formula mode); otherwise at quadrature
/// points. The bulk integrand is constant per cell, so the frozen-x bulk term
/// is exact; the trace-type surface term is integrated in closed form.
inline EnergyBreakdown eval_energy(const SBVField& u, const DensityPair& pair,
                                   const std::optional<Vec>& x_frozen = std::nullopt) {
    const Grid& g = u.grid();
    if (x_frozen && static_cast<int>(x_frozen->size()) != g.dim())
        throw std::invalid_argument("eval_energy: frozen point dimension mismatch");
    EnergyBreakdown out;

    for (int c = 0; c < g.cell_count(); ++c) {
        const Cell cell = g.cell(c);
        if (x_frozen || !pair.bulk_x_dependent) {
            const Vec x = x_frozen ? *x_frozen : u.centroid(c);
            out.bulk_value += cell.volume * pair.eval_bulk(x, u.slope(c));
        } else if (g.dim() == 1 || cell.vertices.size() == 4) {
            // tensor 2x2 (or 2-point) Gauss over the box cell
            if (g.dim() == 1) {
                for (int k = 0; k < 2; ++k) {
                    const Vec ref = {cell.vertices[0][0] +
                                     quadrature::g2_nodes[k] * (cell.vertices[1][0] - cell.vertices[0][0])};
                    out.bulk_value += cell.volume * quadrature::g2_weights[k] *
                                      pair.eval_bulk(g.to_physical(ref), u.slope(c));
                }
            } else {
                const Vec& v0 = cell.vertices[0];
                const Vec& v2 = cell.vertices[2];
                for (int kx = 0; kx < 2; ++kx)
                    for (int ky = 0; ky < 2; ++ky) {
                        const Vec ref = {v0[0] + quadrature::g2_nodes[kx] * (v2[0] - v0[0]),
                                         v0[1] + quadrature::g2_nodes[ky] * (v2[1] - v0[1])};
                        out.bulk_value += cell.volume * quadrature::g2_weights[kx] *
                                          quadrature::g2_weights[ky] *
                                          pair.eval_bulk(g.to_physical(ref), u.slope(c));
                    }
            }
        } else {
            // degree-2 exact rule on the triangle (edge midpoints)
            for (int e = 0; e < 3; ++e) {
                const Vec& p = cell.vertices[static_cast<std::size_t>(e)];
                const Vec& q = cell.vertices[static_cast<std::size_t>((e + 1) % 3)];
                const Vec mid = {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])};
                out.bulk_value += cell.volume / 3.0 * pair.eval_bulk(g.to_physical(mid), u.slope(c));
            }
        }
    }

    const auto faces = g.interior_faces();
    out.per_face.reserve(faces.size());
    for (const Face& f : faces) {
        const double contrib = face_contribution(u, f, pair, x_frozen);
        out.surface_value += contrib;
        out.per_face.push_back(contrib);
    }

    out.total = out.bulk_value + out.surface_value;
    return out;
}

/// Mass of |Du|: the L1 norm of the absolutely continuous gradient plus the
/// total jump mass over interior faces.
inline double total_variation(const SBVField& u) {
    const Grid& g = u.grid();
    double tv = 0.0;
    for (int c = 0; c < g.cell_count(); ++c) tv += g.cell(c).volume * u.slope(c).frobenius();
    Vec j0, j1;
    for (const Face& f : g.interior_faces()) {
        u.face_jump(f, j0, j1);
        tv += f.measure * quadrature::norm_affine(j0, j1);
    }
    return tv;
}

/// L1 norm of the field itself (exact for d = 1, Gauss otherwise).
inline double l1_norm(const SBVField& u) {
    const Grid& g = u.grid();
    double s = 0.0;
    for (int c = 0; c < g.cell_count(); ++c) {
        const Cell cell = g.cell(c);
        if (g.dim() == 1) {
            const Vec pa = g.to_physical(cell.vertices[0]);
            const Vec pb = g.to_physical(cell.vertices[1]);
            const Vec va = u.piece_value(c, pa);
            const Vec vb = u.piece_value(c, pb);
            if (u.value_dim() == 1)
                s += cell.volume * quadrature::abs_affine(va[0], vb[0] - va[0]);
            else
                s += cell.volume * quadrature::norm_affine(va, vb - va);
        } else if (cell.vertices.size() == 4) {
            const Vec& v0 = cell.vertices[0];
            const Vec& v2 = cell.vertices[2];
            for (int kx = 0; kx < 4; ++kx)
                for (int ky = 0; ky < 4; ++ky) {
                    const Vec ref = {v0[0] + quadrature::g4_nodes[kx] * (v2[0] - v0[0]),
                                     v0[1] + quadrature::g4_nodes[ky] * (v2[1] - v0[1])};
                    s += cell.volume * quadrature::g4_weights[kx] * quadrature::g4_weights[ky] *
                         norm(u.piece_value(c, g.to_physical(ref)));
                }
        } else {
            for (int e = 0; e < 3; ++e) {
                const Vec& p = cell.vertices[static_cast<std::size_t>(e)];
                const Vec& q = cell.vertices[static_cast<std::size_t>((e + 1) % 3)];
                const Vec mid = {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])};
                s += cell.volume / 3.0 * norm(u.piece_value(c, g.to_physical(mid)));
            }
        }
    }
    return s;
}

/// Pointwise sum u + v; the fields must share the grid layout.
inline SBVField field_sum(const SBVField& u, const SBVField& v, double sign = 1.0) {
    if (!u.grid().same_layout(v.grid()) || u.value_dim() != v.value_dim())
        throw std::invalid_argument("field_sum: incompatible fields");
    SBVField w(u.grid(), u.value_dim());
    for (int c = 0; c < u.grid().cell_count(); ++c) {
        w.offset(c) = u.offset(c) + sign * v.offset(c);
        w.slope(c) = u.slope(c) + sign * v.slope(c);
    }
    return w;
}

/// Exact re-representation of u on a k-times finer grid (quad grids only).
inline SBVField refine(const SBVField& u, int k) {
    const Grid& g = u.grid();
    if (k < 1) throw std::invalid_argument("refine: factor must be positive");
    if (g.split_diagonal() || g.graded())
        throw std::invalid_argument("refine: only uniform quad grids are refinable");
    Grid fine(g.dim(), g.cells_per_side() * k, g.lo(), g.hi(), g.rotation());
    SBVField w(fine, u.value_dim());
    for (int c = 0; c < fine.cell_count(); ++c) {
        const int parent = g.locate(fine.cell(c).centroid);
        w.slope(c) = u.slope(parent);
        w.offset(c) = u.piece_value(parent, w.centroid(c));
    }
    return w;
}

} // namespace hsd

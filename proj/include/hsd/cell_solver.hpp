#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsd/density.hpp"
#include "hsd/grid.hpp"
#include "hsd/matrix.hpp"
#include "hsd/rng.hpp"
#include "hsd/sbv_field.hpp"

namespace hsd {

struct SolverOptions {
    int restarts = 8;
    int max_iterations = 300;      // per smoothing stage
    double tolerance = 1e-9;       // gradient stopping tolerance
    double eps_start = 1e-1;       // smoothing continuation, factor-10 steps
    double eps_end = 1e-6;
    int polish_sweeps = 8;
    double feasibility_tol = 1e-8;
    std::uint64_t seed = 0;
    bool allow_exact_1d = true;
    bool split_diagonals = true;   // triangulate 2D bulk grids
    double boundary_layer = 0.125; // thin-strip fraction for 2D bulk grids
};

/// Minimize H(x,A,B) over the discrete competitor class on the n-grid:
/// boundary trace a_A enforced exactly, mean gradient B enforced exactly.
struct BulkProblem {
    Vec x;
    Matrix A, B;
    DensityPair pair;
    int n = 8;
    SolverOptions options;
};

/// Minimize h(x,lambda,nu) over piecewise-constant competitors on Q_nu with
/// the boundary pinned to the step datum s_{lambda,0,nu}.
struct SurfaceProblem {
    Vec x;
    Vec lambda;
    Vec nu;
    DensityPair pair;
    int n = 8;
    SolverOptions options;
};

enum class SolveMode { Exact1dConvex, NumericUpperBound };

struct SolveResult {
    double value = 0.0;
    SBVField minimizer;
    double boundary_residual = 0.0;
    double mean_gradient_residual = 0.0;
    SolveMode mode = SolveMode::NumericUpperBound;
    int iterations = 0;
    int restarts_used = 0;
    bool converged = true;
};

namespace detail_solver {

/// Smoothed surface density sqrt(.^2 + eps^2) with analytic gradients for
/// the catalog families and a finite-difference fallback.
struct SmoothSurface {
    const DensityPair* pair;
    Vec x;
    double eps = 0.0;
    int kind = 2; // 0 trace, 1 norm, 2 generic

    static SmoothSurface make(const DensityPair& p, const Vec& x, double eps) {
        SmoothSurface s;
        s.pair = &p;
        s.x = x;
        s.eps = eps;
        if (p.surface_trace_type)
            s.kind = 0;
        else if (p.surface_name == "norm-interfacial")
            s.kind = 1;
        else
            s.kind = 2;
        return s;
    }

    double scale(const Vec& nu) const { return pair->eval_surface(x, nu, nu); }

    double value(const Vec& lambda, const Vec& nu) const {
        if (kind == 0) {
            const double t = dot(lambda, nu);
            return scale(nu) * std::sqrt(t * t + eps * eps);
        }
        if (kind == 1) {
            const double t = norm(lambda);
            return scale(nu) * std::sqrt(t * t + eps * eps);
        }
        return pair->eval_surface(x, lambda, nu);
    }

    Vec grad(const Vec& lambda, const Vec& nu) const {
        if (kind == 0) {
            const double t = dot(lambda, nu);
            return (scale(nu) * t / std::sqrt(t * t + eps * eps)) * nu;
        }
        if (kind == 1) {
            const double t = norm(lambda);
            return (scale(nu) / std::sqrt(t * t + eps * eps)) * lambda;
        }
        Vec g(lambda.size(), 0.0);
        const double h = 1e-6 * (1.0 + norm(lambda));
        Vec lp = lambda, lm = lambda;
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            lp[i] += h;
            lm[i] -= h;
            g[i] = (pair->eval_surface(x, lp, nu) - pair->eval_surface(x, lm, nu)) / (2.0 * h);
            lp[i] = lambda[i];
            lm[i] = lambda[i];
        }
        return g;
    }
};

inline Matrix bulk_grad(const DensityPair& pair, const Vec& x, const Matrix& S) {
    if (pair.bulk_gradient) return (*pair.bulk_gradient)(x, S);
    Matrix g(S.rows(), S.cols());
    Matrix sp = S;
    const double h = 1e-6 * (1.0 + S.frobenius());
    for (int i = 0; i < S.rows(); ++i)
        for (int j = 0; j < S.cols(); ++j) {
            sp(i, j) = S(i, j) + h;
            const double fp = pair.bulk(x, sp);
            sp(i, j) = S(i, j) - h;
            const double fm = pair.bulk(x, sp);
            sp(i, j) = S(i, j);
            g(i, j) = (fp - fm) / (2.0 * h);
        }
    return g;
}

/// Per-cell parametrization of the feasible affine class: which degrees of
/// freedom remain after the boundary trace has been eliminated exactly.
struct CellParam {
    enum Kind { Free, Rank1, OffsetTied, FixedAll } kind = Free;
    int slope_base = -1;
    int offset_base = -1;
    Vec pin_point; // physical point with u(p) = A p
    Vec m;         // physical unit direction of the free slope column (Rank1)
};

/// Assembly of the equality-constrained bulk problem: theta <-> fields maps,
/// the mean-gradient constraint, objective and gradient.
class BulkAssembly {
public:
    BulkAssembly(const Grid& grid, const Vec& x, const Matrix& A, const Matrix& B,
                 const DensityPair& pair)
        : grid_(grid), x_(x), A_(A), B_(B), pair_(&pair), d_(A.rows()), N_(grid.dim()),
          scratch_(grid, A.rows()), faces_(grid.interior_faces()) {
        build_params();
        build_constraint();
        build_adjacency();
    }

    int theta_size() const { return theta_size_; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<CellParam>& params() const { return cell_params_; }

    /// Extract the representable part of a desired field into theta.
    Vec project_field(const SBVField& u) const {
        Vec th(static_cast<std::size_t>(theta_size_), 0.0);
        for (int c = 0; c < grid_.cell_count(); ++c) {
            const CellParam& p = cell_params_[static_cast<std::size_t>(c)];
            if (p.kind == CellParam::Free) {
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < N_; ++j)
                        th[static_cast<std::size_t>(p.slope_base + i * N_ + j)] = u.slope(c)(i, j);
                for (int i = 0; i < d_; ++i)
                    th[static_cast<std::size_t>(p.offset_base + i)] = u.offset(c)[static_cast<std::size_t>(i)];
            } else if (p.kind == CellParam::Rank1) {
                const Matrix diff = u.slope(c) - A_;
                for (int i = 0; i < d_; ++i) {
                    double w = 0.0;
                    for (int j = 0; j < N_; ++j) w += diff(i, j) * p.m[static_cast<std::size_t>(j)];
                    th[static_cast<std::size_t>(p.slope_base + i)] = w;
                }
            } else if (p.kind == CellParam::OffsetTied) {
                for (int i = 0; i < d_; ++i)
                    th[static_cast<std::size_t>(p.slope_base + i)] = u.slope(c)(i, 0);
            }
        }
        return th;
    }

    /// theta -> field (boundary trace exact by construction).
    void unpack(const Vec& th, SBVField& u) const {
        for (int c = 0; c < grid_.cell_count(); ++c) {
            const CellParam& p = cell_params_[static_cast<std::size_t>(c)];
            if (p.kind == CellParam::Free) {
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < N_; ++j)
                        u.slope(c)(i, j) = th[static_cast<std::size_t>(p.slope_base + i * N_ + j)];
                for (int i = 0; i < d_; ++i)
                    u.offset(c)[static_cast<std::size_t>(i)] = th[static_cast<std::size_t>(p.offset_base + i)];
            } else if (p.kind == CellParam::Rank1 || p.kind == CellParam::OffsetTied) {
                Matrix S = A_;
                if (p.kind == CellParam::Rank1) {
                    for (int i = 0; i < d_; ++i)
                        for (int j = 0; j < N_; ++j)
                            S(i, j) += th[static_cast<std::size_t>(p.slope_base + i)] * p.m[static_cast<std::size_t>(j)];
                } else {
                    for (int i = 0; i < d_; ++i) S(i, 0) = th[static_cast<std::size_t>(p.slope_base + i)];
                }
                u.slope(c) = S;
                const Vec rel = p.pin_point - u.centroid(c);
                u.offset(c) = A_.apply(p.pin_point) - S.apply(rel);
            } else {
                u.slope(c) = A_;
                u.offset(c) = A_.apply(u.centroid(c));
            }
        }
    }

    /// Project theta onto the affine set {C theta = b} (mean gradient).
    void make_feasible(Vec& th) const {
        if (constraint_rows_.empty()) return;
        Vec r = residual(th);
        Vec y = solve_gram(r);
        apply_ct(y, th, -1.0);
    }

    /// Remove the constraint-violating component of a gradient.
    void project_gradient(Vec& g) const {
        if (constraint_rows_.empty()) return;
        Vec cg(constraint_rows_.size(), 0.0);
        for (std::size_t r = 0; r < constraint_rows_.size(); ++r)
            for (const auto& [idx, co] : constraint_rows_[r]) cg[r] += co * g[static_cast<std::size_t>(idx)];
        Vec y = solve_gram(cg);
        apply_ct(y, g, -1.0);
    }

    double mean_gradient_residual(const SBVField& u) const {
        Matrix mean(d_, N_);
        for (int c = 0; c < grid_.cell_count(); ++c) mean = mean + grid_.cell(c).volume * u.slope(c);
        mean = (1.0 / grid_.volume()) * mean;
        return (mean - B_).frobenius();
    }

    double boundary_residual(const SBVField& u) const {
        double worst = 0.0;
        for (const Face& f : grid_.boundary_faces()) {
            for (const Vec* pref : {&f.a, &f.b}) {
                const Vec p = grid_.to_physical(*pref);
                const Vec diff = u.piece_value(f.minus, p) - A_.apply(p);
                worst = std::max(worst, norm(diff));
            }
        }
        return worst;
    }

    /// Smoothed objective; fills grad (projected) when requested.
    double eval(const Vec& th, Vec* grad, double eps) {
        unpack(th, scratch_);
        const SmoothSurface psi = SmoothSurface::make(*pair_, x_, eps);
        std::vector<Matrix> gS;
        std::vector<Vec> gOff;
        if (grad) {
            gS.assign(static_cast<std::size_t>(grid_.cell_count()), Matrix(d_, N_));
            gOff.assign(static_cast<std::size_t>(grid_.cell_count()), Vec(static_cast<std::size_t>(d_), 0.0));
        }
        double val = 0.0;
        for (int c = 0; c < grid_.cell_count(); ++c) {
            const double vol = grid_.cell(c).volume;
            val += vol * pair_->eval_bulk(x_, scratch_.slope(c));
            if (grad) gS[static_cast<std::size_t>(c)] = gS[static_cast<std::size_t>(c)] + vol * bulk_grad(*pair_, x_, scratch_.slope(c));
        }
        Vec j0, j1;
        for (const Face& f : faces_) {
            scratch_.face_jump(f, j0, j1);
            const Vec nu = grid_.to_physical(f.normal);
            const Vec pa = grid_.to_physical(f.a);
            const Vec pb = grid_.to_physical(f.b);
            for (int k = 0; k < 4; ++k) {
                const double s = quadrature::g4_nodes[k];
                const double w = f.measure * quadrature::g4_weights[k];
                const Vec lam = j0 + s * j1;
                val += w * psi.value(lam, nu);
                if (grad) {
                    const Vec gl = psi.grad(lam, nu);
                    const Vec xp = pa + s * (pb - pa);
                    for (int i = 0; i < d_; ++i) {
                        const double gi = w * gl[static_cast<std::size_t>(i)];
                        gOff[static_cast<std::size_t>(f.plus)][static_cast<std::size_t>(i)] += gi;
                        gOff[static_cast<std::size_t>(f.minus)][static_cast<std::size_t>(i)] -= gi;
                        for (int j = 0; j < N_; ++j) {
                            gS[static_cast<std::size_t>(f.plus)](i, j) +=
                                gi * (xp[static_cast<std::size_t>(j)] - scratch_.centroid(f.plus)[static_cast<std::size_t>(j)]);
                            gS[static_cast<std::size_t>(f.minus)](i, j) -=
                                gi * (xp[static_cast<std::size_t>(j)] - scratch_.centroid(f.minus)[static_cast<std::size_t>(j)]);
                        }
                    }
                }
            }
        }
        if (grad) {
            grad->assign(static_cast<std::size_t>(theta_size_), 0.0);
            for (int c = 0; c < grid_.cell_count(); ++c) {
                const CellParam& p = cell_params_[static_cast<std::size_t>(c)];
                const Matrix& gs = gS[static_cast<std::size_t>(c)];
                const Vec& go = gOff[static_cast<std::size_t>(c)];
                if (p.kind == CellParam::Free) {
                    for (int i = 0; i < d_; ++i)
                        for (int j = 0; j < N_; ++j)
                            (*grad)[static_cast<std::size_t>(p.slope_base + i * N_ + j)] += gs(i, j);
                    for (int i = 0; i < d_; ++i)
                        (*grad)[static_cast<std::size_t>(p.offset_base + i)] += go[static_cast<std::size_t>(i)];
                } else if (p.kind == CellParam::Rank1 || p.kind == CellParam::OffsetTied) {
                    const Vec rel = p.pin_point - scratch_.centroid(c);
                    if (p.kind == CellParam::Rank1) {
                        for (int i = 0; i < d_; ++i) {
                            double acc = 0.0;
                            for (int j = 0; j < N_; ++j)
                                acc += (gs(i, j) - go[static_cast<std::size_t>(i)] * rel[static_cast<std::size_t>(j)]) *
                                       p.m[static_cast<std::size_t>(j)];
                            (*grad)[static_cast<std::size_t>(p.slope_base + i)] += acc;
                        }
                    } else {
                        for (int i = 0; i < d_; ++i)
                            (*grad)[static_cast<std::size_t>(p.slope_base + i)] +=
                                gs(i, 0) - go[static_cast<std::size_t>(i)] * rel[0];
                    }
                }
            }
            project_gradient(*grad);
        }
        return val;
    }

    /// Unsmoothed coordinate-descent polish on the free offsets. Only the
    /// faces adjacent to the active cell are re-evaluated.
    void polish(SBVField& u, int sweeps) const {
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            for (int c = 0; c < grid_.cell_count(); ++c) {
                const CellParam& p = cell_params_[static_cast<std::size_t>(c)];
                if (p.kind != CellParam::Free) continue;
                for (int i = 0; i < d_; ++i) {
                    auto local = [&](double v) {
                        u.offset(c)[static_cast<std::size_t>(i)] = v;
                        double e = 0.0;
                        for (int fi : adjacency_[static_cast<std::size_t>(c)])
                            e += face_contribution(u, faces_[static_cast<std::size_t>(fi)], *pair_,
                                                   std::optional<Vec>(x_));
                        return e;
                    };
                    const double v0 = u.offset(c)[static_cast<std::size_t>(i)];
                    double radius = 1.0;
                    Vec j0, j1;
                    for (int fi : adjacency_[static_cast<std::size_t>(c)]) {
                        u.face_jump(faces_[static_cast<std::size_t>(fi)], j0, j1);
                        radius = std::max(radius, 2.0 * (norm(j0) + norm(j1)));
                    }
                    double a = v0 - radius, b = v0 + radius;
                    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
                    double f1 = local(c1), f2 = local(c2);
                    for (int it = 0; it < 90; ++it) {
                        if (f1 <= f2) {
                            b = c2;
                            c2 = c1;
                            f2 = f1;
                            c1 = b - gr * (b - a);
                            f1 = local(c1);
                        } else {
                            a = c1;
                            c1 = c2;
                            f1 = f2;
                            c2 = a + gr * (b - a);
                            f2 = local(c2);
                        }
                    }
                    const double vbest = 0.5 * (a + b);
                    if (local(vbest) > local(v0)) u.offset(c)[static_cast<std::size_t>(i)] = v0;
                    else u.offset(c)[static_cast<std::size_t>(i)] = vbest;
                }
            }
        }
    }

private:
    void build_params() {
        std::map<int, std::vector<Face>> by_cell;
        for (const Face& f : grid_.boundary_faces()) by_cell[f.minus].push_back(f);
        cell_params_.resize(static_cast<std::size_t>(grid_.cell_count()));
        int next = 0;
        for (int c = 0; c < grid_.cell_count(); ++c) {
            CellParam& p = cell_params_[static_cast<std::size_t>(c)];
            auto it = by_cell.find(c);
            if (it == by_cell.end()) {
                p.kind = CellParam::Free;
                p.slope_base = next;
                next += d_ * N_;
                p.offset_base = next;
                next += d_;
                continue;
            }
            // collect distinct pinned points (physical)
            std::vector<Vec> pts;
            for (const Face& f : it->second) {
                for (const Vec* r : {&f.a, &f.b}) {
                    const Vec ph = grid_.to_physical(*r);
                    bool dup = false;
                    for (const Vec& q : pts)
                        if (norm(q - ph) < 1e-12) dup = true;
                    if (!dup) pts.push_back(ph);
                }
            }
            if (N_ == 1) {
                // 1D: one pin point ties the offset; two pin the cell fully
                if (pts.size() >= 2) {
                    p.kind = CellParam::FixedAll;
                } else {
                    p.kind = CellParam::OffsetTied;
                    p.pin_point = pts[0];
                    p.slope_base = next;
                    next += d_;
                }
                continue;
            }
            // 2D: rank of the span of the pinned points
            int rank = 1;
            Vec dir;
            for (std::size_t k = 1; k < pts.size(); ++k) {
                Vec dd = pts[k] - pts[0];
                const double nd = norm(dd);
                if (nd < 1e-12) continue;
                dd = (1.0 / nd) * dd;
                if (rank == 1) {
                    dir = dd;
                    rank = 2;
                } else {
                    const double cross = dir[0] * dd[1] - dir[1] * dd[0];
                    if (std::abs(cross) > 1e-10) rank = 3;
                }
            }
            if (rank >= 3) {
                p.kind = CellParam::FixedAll;
            } else { // a single boundary face: slope free across it
                p.kind = CellParam::Rank1;
                p.pin_point = pts[0];
                p.m = {-dir[1], dir[0]};
                p.slope_base = next;
                next += d_;
            }
        }
        theta_size_ = next;
    }

    void build_constraint() {
        const int rows = d_ * N_;
        constraint_rows_.assign(static_cast<std::size_t>(rows), {});
        constraint_b_.assign(static_cast<std::size_t>(rows), 0.0);
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < N_; ++j)
                constraint_b_[static_cast<std::size_t>(i * N_ + j)] = B_(i, j) * grid_.volume();
        bool any_free = false;
        for (int c = 0; c < grid_.cell_count(); ++c) {
            const CellParam& p = cell_params_[static_cast<std::size_t>(c)];
            const double vol = grid_.cell(c).volume;
            if (p.kind == CellParam::Free) {
                any_free = true;
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < N_; ++j)
                        constraint_rows_[static_cast<std::size_t>(i * N_ + j)].push_back(
                            {p.slope_base + i * N_ + j, vol});
            } else if (p.kind == CellParam::Rank1) {
                any_free = true;
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < N_; ++j) {
                        constraint_rows_[static_cast<std::size_t>(i * N_ + j)].push_back(
                            {p.slope_base + i, vol * p.m[static_cast<std::size_t>(j)]});
                        constraint_b_[static_cast<std::size_t>(i * N_ + j)] -= vol * A_(i, j);
                    }
            } else if (p.kind == CellParam::OffsetTied) {
                any_free = true;
                for (int i = 0; i < d_; ++i)
                    constraint_rows_[static_cast<std::size_t>(i)].push_back({p.slope_base + i, vol});
            } else {
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < N_; ++j)
                        constraint_b_[static_cast<std::size_t>(i * N_ + j)] -= vol * A_(i, j);
            }
        }
        if (!any_free) throw std::runtime_error("solve_bulk: infeasible constraint assembly (no free cells)");
        // Gram matrix C C^T, factored by naive Gaussian elimination (tiny).
        gram_.assign(static_cast<std::size_t>(rows) * rows, 0.0);
        for (int r = 0; r < rows; ++r)
            for (int s = 0; s <= r; ++s) {
                double acc = 0.0;
                // sparse dot of rows r and s
                const auto& rr = constraint_rows_[static_cast<std::size_t>(r)];
                const auto& ss = constraint_rows_[static_cast<std::size_t>(s)];
                std::size_t ri = 0, si = 0;
                while (ri < rr.size() && si < ss.size()) {
                    if (rr[ri].first == ss[si].first) {
                        acc += rr[ri].second * ss[si].second;
                        ++ri;
                        ++si;
                    } else if (rr[ri].first < ss[si].first)
                        ++ri;
                    else
                        ++si;
                }
                gram_[static_cast<std::size_t>(r) * rows + s] = acc;
                gram_[static_cast<std::size_t>(s) * rows + r] = acc;
            }
    }

    void build_adjacency() {
        adjacency_.assign(static_cast<std::size_t>(grid_.cell_count()), {});
        for (std::size_t fi = 0; fi < faces_.size(); ++fi) {
            adjacency_[static_cast<std::size_t>(faces_[fi].minus)].push_back(static_cast<int>(fi));
            adjacency_[static_cast<std::size_t>(faces_[fi].plus)].push_back(static_cast<int>(fi));
        }
    }

    Vec residual(const Vec& th) const {
        Vec r(constraint_rows_.size(), 0.0);
        for (std::size_t row = 0; row < constraint_rows_.size(); ++row) {
            for (const auto& [idx, co] : constraint_rows_[row]) r[row] += co * th[static_cast<std::size_t>(idx)];
            r[row] -= constraint_b_[row];
        }
        return r;
    }

    Vec solve_gram(Vec rhs) const {
        const int n = static_cast<int>(rhs.size());
        std::vector<double> a = gram_;
        // partial-pivot Gaussian elimination
        std::vector<int> perm(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        for (int k = 0; k < n; ++k) {
            int piv = k;
            for (int i = k + 1; i < n; ++i)
                if (std::abs(a[static_cast<std::size_t>(i) * n + k]) > std::abs(a[static_cast<std::size_t>(piv) * n + k])) piv = i;
            if (std::abs(a[static_cast<std::size_t>(piv) * n + k]) < 1e-14)
                throw std::runtime_error("solve_bulk: infeasible constraint assembly (singular Gram)");
            if (piv != k) {
                for (int j = 0; j < n; ++j) std::swap(a[static_cast<std::size_t>(k) * n + j], a[static_cast<std::size_t>(piv) * n + j]);
                std::swap(rhs[static_cast<std::size_t>(k)], rhs[static_cast<std::size_t>(piv)]);
            }
            for (int i = k + 1; i < n; ++i) {
                const double f = a[static_cast<std::size_t>(i) * n + k] / a[static_cast<std::size_t>(k) * n + k];
                for (int j = k; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] -= f * a[static_cast<std::size_t>(k) * n + j];
                rhs[static_cast<std::size_t>(i)] -= f * rhs[static_cast<std::size_t>(k)];
            }
        }
        Vec y(static_cast<std::size_t>(n), 0.0);
        for (int i = n - 1; i >= 0; --i) {
            double acc = rhs[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < n; ++j) acc -= a[static_cast<std::size_t>(i) * n + j] * y[static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(i)] = acc / a[static_cast<std::size_t>(i) * n + i];
        }
        return y;
    }

    void apply_ct(const Vec& y, Vec& target, double sign) const {
        for (std::size_t row = 0; row < constraint_rows_.size(); ++row)
            for (const auto& [idx, co] : constraint_rows_[row])
                target[static_cast<std::size_t>(idx)] += sign * co * y[row];
    }

    Grid grid_;
    Vec x_;
    Matrix A_, B_;
    const DensityPair* pair_;
    int d_, N_;
    SBVField scratch_;
    std::vector<Face> faces_;
    std::vector<CellParam> cell_params_;
    int theta_size_ = 0;
    std::vector<std::vector<std::pair<int, double>>> constraint_rows_;
    Vec constraint_b_;
    std::vector<double> gram_;
    std::vector<std::vector<int>> adjacency_;
};

/// Barzilai-Borwein descent with a nonmonotone Armijo safeguard on the
/// smoothed objective. Returns the iteration count actually used.
template <typename Eval>
int bb_descent(Eval&& eval, Vec& th, double eps, int max_iter, double tol) {
    Vec g, g_prev, th_prev;
    double f = eval(th, &g, eps);
    double gn = 0.0;
    for (double v : g) gn = std::max(gn, std::abs(v));
    if (gn < tol) return 0;
    double alpha = 1.0 / std::max(1.0, gn);
    std::vector<double> recent{f};
    int it = 0;
    for (; it < max_iter; ++it) {
        const double fmax = *std::max_element(recent.begin(), recent.end());
        Vec cand(th.size());
        double fc = 0.0;
        double a = alpha;
        bool ok = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (std::size_t i = 0; i < th.size(); ++i) cand[i] = th[i] - a * g[i];
            fc = eval(cand, nullptr, eps);
            double dec = 0.0;
            for (double v : g) dec += v * v;
            if (fc <= fmax - 1e-4 * a * dec) {
                ok = true;
                break;
            }
            a *= 0.5;
        }
        if (!ok) break;
        th_prev = th;
        g_prev = g;
        th = cand;
        f = fc;
        recent.push_back(f);
        if (recent.size() > 6) recent.erase(recent.begin());
        eval(th, &g, eps);
        gn = 0.0;
        for (double v : g) gn = std::max(gn, std::abs(v));
        if (gn < tol) {
            ++it;
            break;
        }
        // BB1 step from the last pair
        double sy = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < th.size(); ++i) {
            const double s = th[i] - th_prev[i];
            const double y = g[i] - g_prev[i];
            sy += s * y;
            yy += y * y;
        }
        alpha = (yy > 1e-300 && sy > 0.0) ? sy / yy : std::max(a * 2.0, 1e-12);
        alpha = std::min(alpha, 1e6);
    }
    return it;
}

} // namespace detail_solver

namespace seeds {

/// Sampled-linear competitor: uniform slope S0 with offsets taken from the
/// affine map A x at cell centroids (jumps carry the disarrangement).
inline SBVField sampled_linear(const Grid& grid, const Matrix& A, const Matrix& S0) {
    SBVField u(grid, A.rows());
    for (int c = 0; c < grid.cell_count(); ++c) {
        u.slope(c) = S0;
        u.offset(c) = A.apply(u.centroid(c));
    }
    return u;
}

/// Square-center variant: both triangles of a split cell share the sample
/// point, so no jump crosses the diagonal faces.
inline SBVField square_center(const Grid& grid, const Matrix& A, const Matrix& S0) {
    SBVField u(grid, A.rows());
    auto lattice = [&](double v, int axis) {
        const double h = grid.spacing(axis);
        const double lo = grid.lo()[static_cast<std::size_t>(axis)];
        double i = std::floor((v - lo) / h);
        i = std::clamp(i, 0.0, static_cast<double>(grid.cells_per_side() - 1));
        return lo + (i + 0.5) * h;
    };
    for (int c = 0; c < grid.cell_count(); ++c) {
        const Cell cell = grid.cell(c);
        Vec center = cell.centroid;
        if (grid.dim() == 2)
            center = {lattice(cell.centroid[0], 0), lattice(cell.centroid[1], 1)};
        const Vec pc = grid.to_physical(center);
        u.slope(c) = S0;
        u.offset(c) = A.apply(pc) + S0.apply(u.centroid(c) - pc);
    }
    return u;
}

/// Diagonal-transport competitor on split grids: the diagonal part of
/// M = A - B rides the diagonal faces as a staircase with oblique
/// amplitude (cost |tr M| in the limit) while the off-diagonal remainder
/// is carried by free shear jumps across the axis faces.
inline SBVField diagonal_transport(const Grid& grid, const Matrix& A, const Matrix& B) {
    if (grid.dim() != 2 || !grid.split_diagonal())
        throw std::invalid_argument("diagonal_transport: needs a split 2D grid");
    const Matrix M = A - B;
    const double inv_sqrt2 = std::sqrt(0.5);
    const Vec lambda = {std::sqrt(2.0) * M(0, 0), -std::sqrt(2.0) * M(1, 1)};
    const double r1 = M(0, 1) + M(0, 0);
    const double r2 = M(1, 0) + M(1, 1);
    const double h = grid.spacing(0);
    SBVField u(grid, 2);
    for (int c = 0; c < grid.cell_count(); ++c) {
        const Cell cell = grid.cell(c);
        // the shear is sampled at the rectangle center, shared by both
        // triangles, so it never jumps across a diagonal face
        double xlo = cell.vertices[0][0], xhi = xlo, ylo = cell.vertices[0][1], yhi = ylo;
        for (const Vec& v : cell.vertices) {
            xlo = std::min(xlo, v[0]);
            xhi = std::max(xhi, v[0]);
            ylo = std::min(ylo, v[1]);
            yhi = std::max(yhi, v[1]);
        }
        const double xc = 0.5 * (xlo + xhi), yc = 0.5 * (ylo + yhi);
        // diagonal band containing the triangle, by quantizing x - y at
        // its centroid
        const double tau = (cell.centroid[0] - grid.lo()[0]) - (cell.centroid[1] - grid.lo()[1]);
        const double band = std::floor(tau / h);
        const double step = (band + 0.5) * h * inv_sqrt2;
        const Vec w = {lambda[0] * step + r1 * yc, lambda[1] * step + r2 * xc};
        u.slope(c) = B;
        u.offset(c) = B.apply(u.centroid(c)) + w;
    }
    return u;
}

} // namespace seeds

inline SolveResult solve_bulk(const BulkProblem& prob) {
    const int d = prob.A.rows();
    const int N = prob.A.cols();
    if (!prob.A.same_shape(prob.B)) throw std::invalid_argument("solve_bulk: A and B shapes differ");
    if (static_cast<int>(prob.x.size()) != N) throw std::invalid_argument("solve_bulk: x dimension mismatch");
    const SolverOptions& opt = prob.options;

    const bool exact_ok = opt.allow_exact_1d && N == 1 && d == 1 && prob.pair.bulk_convex &&
                          prob.pair.surface_subadditive && prob.pair.surface_homogeneous;
    if (exact_ok) {
        // 1D identity: the boundary trace and the mean-gradient constraint
        // force the total jump mass to A - B; convexity makes the uniform
        // slope B optimal and sub-additivity + homogeneity make the split
        // of the jump budget free, so a single jump attains the infimum.
        Grid grid(1, std::max(prob.n, 2));
        const double a = prob.A(0, 0), b = prob.B(0, 0);
        SBVField u(grid, 1);
        const int jump_face = grid.cells_per_side() / 2;
        const double xf = grid.lo()[0] + jump_face * grid.spacing(0);
        for (int c = 0; c < grid.cell_count(); ++c) {
            u.slope(c) = Matrix{{b}};
            const double side = (u.centroid(c)[0] >= xf) ? 0.5 : -0.5;
            u.offset(c) = {b * u.centroid(c)[0] + side * (a - b)};
        }
        SolveResult res{.minimizer = u};
        const EnergyBreakdown e = eval_energy(u, prob.pair, prob.x);
        res.value = e.total;
        res.mode = SolveMode::Exact1dConvex;
        res.boundary_residual = 0.0;
        res.mean_gradient_residual = 0.0;
        res.iterations = 0;
        res.restarts_used = 0;
        return res;
    }

    const bool split = (N == 2) && opt.split_diagonals;
    const double layer = (N == 2 && prob.n >= 2) ? opt.boundary_layer : 0.0;
    Grid grid(N, prob.n, {}, {}, N == 2 ? Matrix::identity(2) : Matrix{{1.0}}, split, layer);
    detail_solver::BulkAssembly asm_(grid, prob.x, prob.A, prob.B, prob.pair);

    // deterministic restart seeds
    std::vector<SBVField> starts;
    starts.push_back(affine_field(grid, prob.A));
    starts.push_back(seeds::sampled_linear(grid, prob.A, prob.B));
    if (split) {
        starts.push_back(seeds::square_center(grid, prob.A, prob.B));
        starts.push_back(seeds::diagonal_transport(grid, prob.A, prob.B));
    }
    Rng rng(opt.seed);
    while (opt.max_iterations > 0 && static_cast<int>(starts.size()) < opt.restarts) {
        SBVField u(grid, d);
        for (int c = 0; c < grid.cell_count(); ++c) {
            Matrix s = prob.B;
            for (double& v : s.data()) v += 0.3 * rng.normal();
            u.slope(c) = s;
            u.offset(c) = prob.A.apply(u.centroid(c));
            for (double& v : u.offset(c)) v += 0.1 * rng.normal();
        }
        starts.push_back(u);
    }

    SolveResult best;
    double best_value = std::numeric_limits<double>::infinity();
    double best_tv = std::numeric_limits<double>::infinity();
    int total_iters = 0;
    bool converged = false;
    SBVField work(grid, d);
    for (std::size_t r = 0; r < starts.size(); ++r) {
        Vec th = asm_.project_field(starts[r]);
        asm_.make_feasible(th);
        int iters = 0;
        if (opt.max_iterations > 0)
            for (double eps = opt.eps_start; eps >= opt.eps_end * 0.999; eps /= 10.0)
                iters += detail_solver::bb_descent(
                    [&](const Vec& t, Vec* g, double e) { return asm_.eval(t, g, e); }, th, eps,
                    opt.max_iterations, opt.tolerance * (1.0 + std::abs(best_value)));
        asm_.unpack(th, work);
        asm_.polish(work, opt.polish_sweeps);
        total_iters += iters;
        const EnergyBreakdown e = eval_energy(work, prob.pair, prob.x);
        const double tv = total_variation(work);
        if (e.total < best_value - 1e-12 ||
            (e.total < best_value + 1e-12 && tv < best_tv - 1e-12)) {
            best_value = e.total;
            best_tv = tv;
            best.minimizer = work;
            best.value = e.total;
            best.boundary_residual = asm_.boundary_residual(work);
            best.mean_gradient_residual = asm_.mean_gradient_residual(work);
            converged = iters < static_cast<int>(7) * opt.max_iterations;
        }
    }
    best.mode = SolveMode::NumericUpperBound;
    best.iterations = total_iters;
    best.restarts_used = static_cast<int>(starts.size());
    best.converged = converged;
    if (best.boundary_residual > opt.feasibility_tol ||
        best.mean_gradient_residual > opt.feasibility_tol)
        throw std::runtime_error("solve_bulk: minimizer violates feasibility tolerance");
    return best;
}

inline SolveResult solve_surface(const SurfaceProblem& prob) {
    const int d = static_cast<int>(prob.lambda.size());
    const int N = static_cast<int>(prob.nu.size());
    if (std::abs(norm(prob.nu) - 1.0) > 1e-12) throw std::invalid_argument("solve_surface: nu must be unit");
    const SolverOptions& opt = prob.options;
    const int n = (prob.n % 2 == 0) ? prob.n : prob.n + 1; // planar datum must be representable
    Grid grid = (N == 1) ? Grid(1, n) : Grid::rotated_cube(prob.nu, n);
    const Vec zero(static_cast<std::size_t>(d), 0.0);

    // pin the boundary cells to the step datum by boundary-face midpoint
    std::vector<int> pinned(static_cast<std::size_t>(grid.cell_count()), -1); // -1 free, 0 zero, 1 lambda
    for (const Face& f : grid.boundary_faces()) {
        const Vec mid = grid.to_physical(0.5 * (f.a + f.b));
        pinned[static_cast<std::size_t>(f.minus)] = (dot(mid, prob.nu) >= 0.0) ? 1 : 0;
    }

    auto make = [&](int mode, Rng* rng) {
        SBVField u(grid, d);
        for (int c = 0; c < grid.cell_count(); ++c) {
            const int pin = pinned[static_cast<std::size_t>(c)];
            if (pin >= 0) {
                u.offset(c) = pin ? prob.lambda : zero;
                continue;
            }
            switch (mode) {
            case 0: u.offset(c) = (dot(u.centroid(c), prob.nu) >= 0.0) ? prob.lambda : zero; break;
            case 1: u.offset(c) = zero; break;
            case 2: u.offset(c) = prob.lambda; break;
            default:
                u.offset(c) = zero;
                for (double& v : u.offset(c)) v += norm(prob.lambda) * rng->normal();
            }
        }
        return u;
    };

    const auto faces = grid.interior_faces();
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(grid.cell_count()));
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        adjacency[static_cast<std::size_t>(faces[fi].minus)].push_back(static_cast<int>(fi));
        adjacency[static_cast<std::size_t>(faces[fi].plus)].push_back(static_cast<int>(fi));
    }
    auto surface_energy = [&](const SBVField& u) {
        double e = 0.0;
        for (const Face& f : faces) e += face_contribution(u, f, prob.pair, std::optional<Vec>(prob.x));
        return e;
    };
    auto polish = [&](SBVField& u) {
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int sweep = 0; sweep < opt.polish_sweeps; ++sweep)
            for (int c = 0; c < grid.cell_count(); ++c) {
                if (pinned[static_cast<std::size_t>(c)] >= 0) continue;
                for (int i = 0; i < d; ++i) {
                    auto local = [&](double v) {
                        u.offset(c)[static_cast<std::size_t>(i)] = v;
                        double e = 0.0;
                        for (int fi : adjacency[static_cast<std::size_t>(c)])
                            e += face_contribution(u, faces[static_cast<std::size_t>(fi)], prob.pair,
                                                   std::optional<Vec>(prob.x));
                        return e;
                    };
                    const double v0 = u.offset(c)[static_cast<std::size_t>(i)];
                    const double radius = 2.0 * (1.0 + norm(prob.lambda));
                    double a = v0 - radius, b = v0 + radius;
                    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
                    double f1 = local(c1), f2 = local(c2);
                    for (int it = 0; it < 90; ++it) {
                        if (f1 <= f2) { b = c2; c2 = c1; f2 = f1; c1 = b - gr * (b - a); f1 = local(c1); }
                        else { a = c1; c1 = c2; f1 = f2; c2 = a + gr * (b - a); f2 = local(c2); }
                    }
                    const double vbest = 0.5 * (a + b);
                    if (local(vbest) > local(v0)) u.offset(c)[static_cast<std::size_t>(i)] = v0;
                    else u.offset(c)[static_cast<std::size_t>(i)] = vbest;
                }
            }
    };

    Rng rng(opt.seed);
    SolveResult best{.minimizer = SBVField(grid, d)};
    double best_value = std::numeric_limits<double>::infinity();
    double best_tv = std::numeric_limits<double>::infinity();
    const int nstart = std::max(opt.restarts, 3);
    for (int r = 0; r < nstart; ++r) {
        SBVField u = make(std::min(r, 3), &rng);
        polish(u);
        const double v = surface_energy(u);
        const double tv = total_variation(u);
        if (v < best_value - 1e-12 || (v < best_value + 1e-12 && tv < best_tv - 1e-12)) {
            best_value = v;
            best_tv = tv;
            best.minimizer = u;
            best.value = v;
        }
    }
    best.mode = SolveMode::NumericUpperBound;
    best.restarts_used = nstart;
    best.converged = true;
    return best;
}

/// Minimum frozen-x energy over a caller-supplied sequence; by the
/// sequential characterization this upper-bounds H(x,A,B). Fields whose
/// mean gradient strays from B are skipped (reported in `skipped`).
inline double sequential_upper_bound(const BulkProblem& prob, const std::vector<SBVField>& fields,
                                     std::vector<std::string>* skipped = nullptr) {
    if (fields.empty()) throw std::invalid_argument("sequential_upper_bound: empty sequence");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < fields.size(); ++k) {
        const SBVField& u = fields[k];
        Matrix mean(prob.B.rows(), prob.B.cols());
        for (int c = 0; c < u.grid().cell_count(); ++c)
            mean = mean + u.grid().cell(c).volume * u.slope(c);
        mean = (1.0 / u.grid().volume()) * mean;
        if ((mean - prob.B).frobenius() > 1e-6) {
            if (skipped)
                skipped->push_back("field " + std::to_string(k) + " violates the mean-gradient tolerance");
            continue;
        }
        best = std::min(best, eval_energy(u, prob.pair, prob.x).total);
    }
    if (!std::isfinite(best))
        throw std::runtime_error("sequential_upper_bound: no admissible field in the sequence");
    return best;
}

} // namespace hsd

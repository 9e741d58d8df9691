#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hsd/density.hpp"
#include "hsd/matrix.hpp"
#include "hsd/rng.hpp"

namespace hsd {

/// Sampling-based falsification plan for the energy-density class checks.
/// Enlarging `count` only appends tuples (Halton indexing), so a fail can
/// never turn into a pass under a larger plan.
struct SamplingPlan {
    int d = 1;
    int N = 1;
    int count = 1000;
    double matrix_lo = -5.0;
    double matrix_hi = 5.0;
    double t_hi = 5.0;
    /// false selects the non-coercive class: pr3 is reported "not required".
    bool require_coercivity = true;
    double tolerance = 1e-9;
};

enum class Verdict { Pass, Fail, NotRequired };

struct PropertyResult {
    Verdict verdict = Verdict::Pass;
    std::string witness;        // the violating tuple, when verdict == Fail
    double measured = 0.0;      // e.g. smallest constant making the property hold on samples
};

/// Per-property verdicts for one density pair.
struct ClassReport {
    std::map<std::string, PropertyResult> properties;

    bool all_pass() const {
        for (const auto& [k, v] : properties)
            if (v.verdict == Verdict::Fail) return false;
        return true;
    }
};

namespace detail {

inline std::string fmt_vec(const Vec& v) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ")";
    return os.str();
}

inline std::string fmt_mat(const Matrix& m) {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < m.rows(); ++i) {
        os << (i ? ";" : "");
        for (int j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    }
    os << "]";
    return os.str();
}

struct SampleTuple {
    Vec x0, x1;       // points of the unit cube
    Matrix A0, A1;    // bulk arguments
    Vec lambda0, lambda1;
    Vec nu;           // unit
    double t = 2.0;   // homogeneity factor
};

inline Vec unit_from_angle(double u, int N) {
    if (N == 1) return {u < 0.5 ? -1.0 : 1.0};
    const double th = 2.0 * M_PI * u;
    return {std::cos(th), std::sin(th)};
}

inline std::vector<SampleTuple> make_samples(const SamplingPlan& p) {
    std::vector<SampleTuple> s;
    s.reserve(static_cast<std::size_t>(p.count));
    // canonical probes first so witnesses are stable and human readable
    {
        SampleTuple c;
        c.x0.assign(static_cast<std::size_t>(p.N), 0.0);
        c.x1.assign(static_cast<std::size_t>(p.N), 0.25);
        c.A0 = Matrix(p.d, p.N, 0.0);
        c.A1 = Matrix::identity(1);
        c.A1 = Matrix(p.d, p.N, 0.0);
        for (int i = 0; i < std::min(p.d, p.N); ++i) c.A1(i, i) = 1.0;
        c.lambda0.assign(static_cast<std::size_t>(p.d), 0.0);
        c.lambda0[0] = 1.0;
        c.lambda1.assign(static_cast<std::size_t>(p.d), 0.0);
        if (p.d > 1) c.lambda1[1] = 1.0; else c.lambda1[0] = -0.5;
        c.nu.assign(static_cast<std::size_t>(p.N), 0.0);
        c.nu[0] = 1.0;
        c.t = 2.0;
        s.push_back(c);
    }
    const int dN = p.d * p.N;
    for (int i = 1; i < p.count; ++i) {
        SampleTuple c;
        const std::uint64_t idx = static_cast<std::uint64_t>(i);
        int dim = 0;
        auto next = [&](double lo, double hi) { return halton_in(idx, dim++, lo, hi); };
        c.x0.resize(static_cast<std::size_t>(p.N));
        c.x1.resize(static_cast<std::size_t>(p.N));
        for (int k = 0; k < p.N; ++k) c.x0[static_cast<std::size_t>(k)] = next(-0.5, 0.5);
        for (int k = 0; k < p.N; ++k) c.x1[static_cast<std::size_t>(k)] = next(-0.5, 0.5);
        c.A0 = Matrix(p.d, p.N);
        c.A1 = Matrix(p.d, p.N);
        // reuse the leading Halton dims cyclically to keep dimensionality low
        for (int k = 0; k < dN; ++k) c.A0.data()[static_cast<std::size_t>(k)] = next(p.matrix_lo, p.matrix_hi);
        for (int k = 0; k < dN; ++k) c.A1.data()[static_cast<std::size_t>(k)] = next(p.matrix_lo, p.matrix_hi);
        c.lambda0.resize(static_cast<std::size_t>(p.d));
        c.lambda1.resize(static_cast<std::size_t>(p.d));
        for (int k = 0; k < p.d; ++k) c.lambda0[static_cast<std::size_t>(k)] = next(p.matrix_lo, p.matrix_hi);
        for (int k = 0; k < p.d; ++k) c.lambda1[static_cast<std::size_t>(k)] = next(p.matrix_lo, p.matrix_hi);
        c.nu = unit_from_angle(halton(idx + 1, 31), p.N);
        c.t = next(1e-3, p.t_hi);
        s.push_back(c);
    }
    return s;
}

} // namespace detail

/// Tests each property of the energy-density class on sampled tuples.
/// Sampling can only falsify; a Pass means "no violation found".
inline ClassReport check_density_class(const DensityPair& pair, const SamplingPlan& plan) {
    using detail::fmt_mat;
    using detail::fmt_vec;
    const auto samples = detail::make_samples(plan);
    ClassReport rep;
    const double tol = plan.tolerance;
    const double q = pair.exponent_q;

    auto& pr1 = rep.properties["pr1"];
    auto& pr2 = rep.properties["pr2"];
    auto& pr3 = rep.properties["pr3"];
    auto& pr4 = rep.properties["pr4"];
    auto& sym = rep.properties["symmetry"];
    auto& hom = rep.properties["homogeneity"];
    auto& sub = rep.properties["subadditivity"];
    auto& pr5 = rep.properties["pr5"];
    auto& w3 = rep.properties["W3-bounded"];
    if (!plan.require_coercivity) pr3.verdict = Verdict::NotRequired;

    for (const auto& c : samples) {
        // pr1: |W(x1,A)-W(x0,A)| <= omega_W(|x1-x0|)(1+|A|^q)
        {
            const double w0 = pair.eval_bulk(c.x0, c.A0);
            const double w1 = pair.eval_bulk(c.x1, c.A0);
            const double den = 1.0 + std::pow(c.A0.frobenius(), q);
            const double ratio = std::abs(w1 - w0) / den;
            pr1.measured = std::max(pr1.measured, ratio);
            const double budget = pair.constants.omega_W(norm(c.x1 - c.x0));
            if (ratio > budget + tol && pr1.verdict == Verdict::Pass) {
                pr1.verdict = Verdict::Fail;
                pr1.witness = "x0=" + fmt_vec(c.x0) + " x1=" + fmt_vec(c.x1) + " A=" + fmt_mat(c.A0);
            }
        }
        // pr2: q-Lipschitz in A; measured constant is the smallest C_W valid on samples
        {
            const double w0 = pair.eval_bulk(c.x0, c.A0);
            const double w1 = pair.eval_bulk(c.x0, c.A1);
            const double dA = (c.A1 - c.A0).frobenius();
            if (dA > 1e-12) {
                const double den = dA * (1.0 + std::pow(c.A0.frobenius(), q - 1.0) +
                                         std::pow(c.A1.frobenius(), q - 1.0));
                const double ratio = std::abs(w1 - w0) / den;
                pr2.measured = std::max(pr2.measured, ratio);
                if (ratio > pair.constants.C_W + tol && pr2.verdict == Verdict::Pass) {
                    pr2.verdict = Verdict::Fail;
                    pr2.witness = "A0=" + fmt_mat(c.A0) + " A1=" + fmt_mat(c.A1);
                }
            }
        }
        // pr3: coercivity c_W |A|^q - 1/c_W <= W
        if (plan.require_coercivity) {
            const double w = pair.eval_bulk(c.x0, c.A0);
            const double cw = pair.constants.c_W;
            const double lhs = cw * std::pow(c.A0.frobenius(), q) - 1.0 / cw;
            if (lhs > w + tol && pr3.verdict == Verdict::Pass) {
                pr3.verdict = Verdict::Fail;
                pr3.witness = "A=" + fmt_mat(c.A0);
            }
            pr3.measured = std::max(pr3.measured, lhs - w);
        }
        // pr4: c_psi |lambda| <= psi <= C_psi |lambda|
        {
            const double ps = pair.eval_surface(c.x0, c.lambda0, c.nu);
            const double nl = norm(c.lambda0);
            if (nl > 1e-12) {
                const double lo = pair.constants.c_psi * nl;
                const double hi = pair.constants.C_psi * nl;
                pr4.measured = std::max(pr4.measured, ps / nl);
                if ((ps < lo - tol || ps > hi + tol) && pr4.verdict == Verdict::Pass) {
                    pr4.verdict = Verdict::Fail;
                    pr4.witness = "lambda=" + fmt_vec(c.lambda0) + " nu=" + fmt_vec(c.nu);
                }
            }
        }
        // symmetry: psi(x,lambda,nu) = psi(x,-lambda,-nu)
        {
            const double a = pair.eval_surface(c.x0, c.lambda0, c.nu);
            const double b = pair.eval_surface(c.x0, -1.0 * c.lambda0, -1.0 * c.nu);
            sym.measured = std::max(sym.measured, std::abs(a - b));
            if (std::abs(a - b) > tol * (1.0 + std::abs(a)) && sym.verdict == Verdict::Pass) {
                sym.verdict = Verdict::Fail;
                sym.witness = "lambda=" + fmt_vec(c.lambda0) + " nu=" + fmt_vec(c.nu);
            }
        }
        // positive 1-homogeneity
        {
            const double a = pair.eval_surface(c.x0, c.t * c.lambda0, c.nu);
            const double b = c.t * pair.eval_surface(c.x0, c.lambda0, c.nu);
            hom.measured = std::max(hom.measured, std::abs(a - b));
            if (std::abs(a - b) > tol * (1.0 + std::abs(b)) && hom.verdict == Verdict::Pass) {
                hom.verdict = Verdict::Fail;
                hom.witness = "t=" + std::to_string(c.t) + " lambda=" + fmt_vec(c.lambda0) +
                              " nu=" + fmt_vec(c.nu);
            }
        }
        // sub-additivity
        {
            const double a = pair.eval_surface(c.x0, c.lambda0 + c.lambda1, c.nu);
            const double b = pair.eval_surface(c.x0, c.lambda0, c.nu) +
                             pair.eval_surface(c.x0, c.lambda1, c.nu);
            sub.measured = std::max(sub.measured, a - b);
            if (a > b + tol * (1.0 + b) && sub.verdict == Verdict::Pass) {
                sub.verdict = Verdict::Fail;
                sub.witness = "lambda1=" + fmt_vec(c.lambda0) + " lambda2=" + fmt_vec(c.lambda1) +
                              " nu=" + fmt_vec(c.nu);
            }
        }
        // pr5: |psi(x1,.) - psi(x0,.)| <= omega_psi(|x1-x0|) |lambda|
        {
            const double a = pair.eval_surface(c.x0, c.lambda0, c.nu);
            const double b = pair.eval_surface(c.x1, c.lambda0, c.nu);
            const double nl = norm(c.lambda0);
            if (nl > 1e-12) {
                const double ratio = std::abs(a - b) / nl;
                pr5.measured = std::max(pr5.measured, ratio);
                const double budget = pair.constants.omega_psi(norm(c.x1 - c.x0));
                if (ratio > budget + tol && pr5.verdict == Verdict::Pass) {
                    pr5.verdict = Verdict::Fail;
                    pr5.witness = "x0=" + fmt_vec(c.x0) + " x1=" + fmt_vec(c.x1) +
                                  " lambda=" + fmt_vec(c.lambda0);
                }
            }
        }
        // W3: W(., A0) bounded over the sampled x
        {
            if (pair.constants.A0) {
                Matrix a0 = *pair.constants.A0;
                // a 1x1 A0 acts as a constant-fill marker for any plan shape
                if (a0.rows() != plan.d || a0.cols() != plan.N) a0 = Matrix(plan.d, plan.N, a0(0, 0));
                const double w = pair.eval_bulk(c.x0, a0);
                w3.measured = std::max(w3.measured, w);
                if (!std::isfinite(w) && w3.verdict == Verdict::Pass) {
                    w3.verdict = Verdict::Fail;
                    w3.witness = "x=" + fmt_vec(c.x0);
                }
            } else if (w3.verdict == Verdict::Pass) {
                w3.verdict = Verdict::Fail;
                w3.witness = "no A0 declared";
            }
        }
    }
    return rep;
}

} // namespace hsd

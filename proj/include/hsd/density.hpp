#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "hsd/matrix.hpp"

namespace hsd {

using BulkDensity = std::function<double(const Vec& x, const Matrix& A)>;
using SurfaceDensity = std::function<double(const Vec& x, const Vec& lambda, const Vec& nu)>;
/// dW/dA at (x, A); optional, used by the descent solver when present.
using BulkGradient = std::function<Matrix(const Vec& x, const Matrix& A)>;
/// Modulus-of-continuity sampler omega(s).
using Modulus = std::function<double(double)>;

/// Declared constants of the energy-density class: q-Lipschitz constant C_W,
/// coercivity c_W, the two-sided surface bounds c_psi, C_psi, the matrix A0
/// with W(., A0) bounded, and the moduli of continuity in x.
struct DensityConstants {
    double c_W = 1.0;
    double C_W = 1.0;
    double c_psi = 1.0;
    double C_psi = 1.0;
    std::optional<Matrix> A0;
    Modulus omega_W = [](double s) { return s; };
    Modulus omega_psi = [](double s) { return s; };
};

/// A bulk density W(x, A) and a surface density psi(x, lambda, nu) with the
/// metadata needed to pick solver modes and validate class membership.
struct DensityPair {
    BulkDensity bulk;
    SurfaceDensity surface;
    double exponent_q = 2.0;
    DensityConstants constants;

    // Catalog identity; empty for ad-hoc densities. Backend selection (e.g.
    // the closed-form stage-k oracle) matches on these names only.
    std::string bulk_name;
    std::string surface_name;

    // Declared structural facts, set by the catalog or by the caller.
    bool bulk_convex = false;
    bool bulk_x_dependent = false;
    bool surface_x_dependent = false;
    bool surface_subadditive = false;
    bool surface_homogeneous = false;
    // psi(x, lambda, nu) = c |lambda . nu|: the surface integrand is then the
    // absolute value of an affine function along each face and is integrated
    // in closed form.
    bool surface_trace_type = false;

    std::optional<BulkGradient> bulk_gradient;

    double eval_bulk(const Vec& x, const Matrix& A) const {
        const double v = bulk(x, A);
        if (!std::isfinite(v)) throw std::runtime_error("bulk density returned a non-finite value");
        return v;
    }

    double eval_surface(const Vec& x, const Vec& lambda, const Vec& nu) const {
        const double v = surface(x, lambda, nu);
        if (!std::isfinite(v)) throw std::runtime_error("surface density returned a non-finite value");
        return v;
    }
};

/// W(A) = |A|_F^2 with psi = |lambda . nu|; the pair of the worked example.
inline DensityPair make_quadratic_trace_pair() {
    DensityPair p;
    p.bulk = [](const Vec&, const Matrix& A) {
        const double f = A.frobenius();
        return f * f;
    };
    p.bulk_gradient = [](const Vec&, const Matrix& A) { return 2.0 * A; };
    p.surface = [](const Vec&, const Vec& lambda, const Vec& nu) { return std::abs(dot(lambda, nu)); };
    p.exponent_q = 2.0;
    p.bulk_name = "quadratic";
    p.surface_name = "trace-interfacial";
    p.bulk_convex = true;
    p.surface_subadditive = true;
    p.surface_homogeneous = true;
    p.surface_trace_type = true;
    p.constants.c_W = 0.5;
    p.constants.C_W = 2.0;
    p.constants.c_psi = 1.0; // valid on rank-one data in 1D; see class checker
    p.constants.C_psi = 1.0;
    p.constants.A0 = Matrix{{0.0}};
    p.constants.omega_W = [](double) { return 0.0; };
    p.constants.omega_psi = [](double) { return 0.0; };
    return p;
}

inline BulkDensity make_bulk_by_name(const std::string& name, double q) {
    if (name == "quadratic")
        return [](const Vec&, const Matrix& A) {
            const double f = A.frobenius();
            return f * f;
        };
    if (name == "p-power")
        return [q](const Vec&, const Matrix& A) { return std::pow(A.frobenius(), q); };
    throw std::invalid_argument("unknown bulk density: " + name);
}

inline SurfaceDensity make_surface_by_name(const std::string& name, double c = 1.0) {
    if (name == "trace-interfacial")
        return [c](const Vec&, const Vec& lambda, const Vec& nu) { return c * std::abs(dot(lambda, nu)); };
    if (name == "norm-interfacial")
        return [c](const Vec&, const Vec& lambda, const Vec&) { return c * norm(lambda); };
    throw std::invalid_argument("unknown surface density: " + name);
}

/// Built-in catalog addressable by name in config files.
inline DensityPair make_pair_by_name(const std::string& bulk_name, const std::string& surface_name,
                                     double q = 2.0, double surface_scale = 1.0) {
    DensityPair p;
    p.bulk = make_bulk_by_name(bulk_name, q);
    p.surface = make_surface_by_name(surface_name, surface_scale);
    p.exponent_q = q;
    p.bulk_name = bulk_name;
    p.surface_name = surface_name;
    p.bulk_convex = true; // every catalog bulk is convex
    p.surface_subadditive = true;
    p.surface_homogeneous = true;
    p.surface_trace_type = (surface_name == "trace-interfacial");
    if (bulk_name == "quadratic") {
        p.bulk_gradient = [](const Vec&, const Matrix& A) { return 2.0 * A; };
        p.constants.c_W = 0.5;
        p.constants.C_W = 2.0;
    } else {
        p.constants.c_W = 0.5;
        p.constants.C_W = q * std::pow(2.0, q); // generous declared constant
    }
    p.constants.c_psi = surface_scale;
    p.constants.C_psi = surface_scale;
    p.constants.A0 = Matrix{{0.0}};
    p.constants.omega_W = [](double) { return 0.0; };
    p.constants.omega_psi = [](double) { return 0.0; };
    return p;
}

/// True when the pair is in the class of the closed-form recursion: convex
/// catalog bulk with the trace-type surface density (matching is by catalog
/// identity, never by runtime property detection).
inline bool is_trace_example_pair(const DensityPair& pair) {
    return (pair.bulk_name == "quadratic" || pair.bulk_name == "p-power") &&
           pair.surface_name == "trace-interfacial";
}

} // namespace hsd

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hsd/hierarchy.hpp"
#include "hsd/oracle.hpp"
#include "hsd/rng.hpp"

using namespace hsd;

namespace {

SolverOptions fast_options() {
    SolverOptions o;
    o.restarts = 4;
    o.max_iterations = 150;
    o.tolerance = 1e-7;
    o.eps_end = 1e-4;
    return o;
}

HierarchicalDeformation fixture_1d(int n = 4) {
    HierarchicalDeformation def;
    def.g = affine_field(Grid(1, n), Matrix{{1.0}});
    def.levels = {std::vector<Matrix>(static_cast<std::size_t>(n), Matrix{{0.5}}),
                  std::vector<Matrix>(static_cast<std::size_t>(n), Matrix{{0.0}})};
    return def;
}

} // namespace

TEST_CASE("oracle backend reproduces the closed-form recursion") {
    RelaxedDensityHandle h0(make_quadratic_trace_pair(), RelaxBackend::ClosedFormOracle);
    Matrix A{{1.0, 0.0}, {0.0, 1.0}};
    CHECK(h0.stage() == 0);
    CHECK(h0.bulk({0.0, 0.0}, A) == doctest::Approx(2.0));

    RelaxedDensityHandle h1 = h0.next(Matrix{{0.5, 0.0}, {0.0, 0.5}});
    CHECK(h1.stage() == 1);
    // |tr(A - B1)| + |B1|^2 = 1 + 0.5
    CHECK(h1.bulk({0.0, 0.0}, A) == doctest::Approx(1.5));

    RelaxedDensityHandle h2 = h1.next(Matrix{{0.0, 0.0}, {0.0, 0.0}});
    // |tr(A - B2)| + |tr(B2 - B1)| + |B1|^2 = 2 + 1 + 0.5
    CHECK(h2.bulk({0.0, 0.0}, A) == doctest::Approx(3.5));
    CHECK(h2.surface({0.0, 0.0}, {1.0, 2.0}, {0.0, 1.0}) == doctest::Approx(2.0));
}

TEST_CASE("nested backend matches the closed form in 1d") {
    RelaxedDensityHandle h(make_quadratic_trace_pair(), RelaxBackend::NestedSolver, fast_options());
    for (int i = 1; i <= 5; ++i) {
        const double a = halton_in(static_cast<std::uint64_t>(i), 0, -2.0, 2.0);
        const double b2 = halton_in(static_cast<std::uint64_t>(i), 1, -2.0, 2.0);
        const double b1 = halton_in(static_cast<std::uint64_t>(i), 2, -2.0, 2.0);
        RelaxedDensityHandle s2 = h.next(Matrix{{b1}}).next(Matrix{{b2}});
        const double v = s2.bulk({0.0}, Matrix{{a}});
        const double ex = oracle::exact_Wk(Matrix{{a}}, s2.tuple(), [](const Matrix& B) {
            const double f = B.frobenius();
            return f * f;
        });
        CHECK(v == doctest::Approx(ex).epsilon(1e-6));
    }
}

TEST_CASE("memo cache is an invisible optimization") {
    RelaxedDensityHandle h(make_quadratic_trace_pair(), RelaxBackend::NestedSolver, fast_options());
    RelaxedDensityHandle s1 = h.next(Matrix{{0.25}});
    const double v1 = s1.bulk({0.0}, Matrix{{1.5}});
    const double v2 = s1.bulk({0.0}, Matrix{{1.5}}); // memo hit
    CHECK(v1 == v2);
    CHECK_FALSE(s1.cache().empty());
    s1.clear_cache();
    const double v3 = s1.bulk({0.0}, Matrix{{1.5}});
    CHECK(std::abs(v3 - v1) <= 1e-12);
}

TEST_CASE("recursion depth is capped") {
    RelaxedDensityHandle h(make_quadratic_trace_pair(), RelaxBackend::ClosedFormOracle);
    Matrix B{{0.0}};
    RelaxedDensityHandle s = h.next(B).next(B).next(B).next(B);
    CHECK(s.stage() == kRecursionDepthCap);
    CHECK_THROWS_AS(s.next(B), std::runtime_error);
}

TEST_CASE("oracle backend rejects non-catalog pairs") {
    DensityPair p = make_pair_by_name("quadratic", "norm-interfacial");
    CHECK_THROWS_AS(RelaxedDensityHandle(p, RelaxBackend::ClosedFormOracle), std::invalid_argument);
}

TEST_CASE("surface stability at stage one") {
    RelaxedDensityHandle h(make_quadratic_trace_pair(), RelaxBackend::ClosedFormOracle);
    RelaxedDensityHandle s1 = h.next(Matrix{{0.5, 0.0}, {0.0, 0.5}});
    const StabilityReport rep = surface_stability_check(s1, 2, 6);
    CHECK(rep.passed);
    CHECK(rep.max_abs_error <= 2e-2);
    CHECK(rep.samples.size() == 7);
}

TEST_CASE("hierarchical energy of the 1d fixture") {
    const DensityPair pair = make_quadratic_trace_pair();
    HierarchicalDeformation def = fixture_1d();
    EnergyAssignment ea = assign_energy(def, pair, 1);
    CHECK(ea.total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ea.surface == doctest::Approx(0.0));
    REQUIRE(ea.disarrangement_norms.size() == 2);
    CHECK(ea.disarrangement_norms[0] == doctest::Approx(0.5));
    CHECK(ea.disarrangement_norms[1] == doctest::Approx(0.5));

    // a jump of 2 in g adds psi = 2 to the surface term
    for (int c = 0; c < 4; ++c)
        if (def.g.centroid(c)[0] > 0.0) def.g.offset(c)[0] += 2.0;
    EnergyAssignment eb = assign_energy(def, pair, 1);
    CHECK(eb.total == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(eb.surface == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("energy assignment agrees with the direct closed form") {
    const DensityPair pair = make_quadratic_trace_pair();
    HierarchicalDeformation def = fixture_1d(5);
    // ragged per-cell tuples
    for (int c = 0; c < 5; ++c) {
        def.levels[0][static_cast<std::size_t>(c)] = Matrix{{0.2 * c - 0.3}};
        def.levels[1][static_cast<std::size_t>(c)] = Matrix{{0.1 * (c % 2)}};
    }
    const double direct = oracle::exact_E1(def.g, def.levels, [](const Matrix& B) {
        const double f = B.frobenius();
        return f * f;
    });
    CHECK(assign_energy(def, pair, 1).total == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("duplicating a level leaves the fully relaxed energy unchanged") {
    const DensityPair pair = make_quadratic_trace_pair();
    HierarchicalDeformation def = fixture_1d();
    const double base = assign_energy(def, pair, 1).total;
    HierarchicalDeformation dup = def;
    dup.levels.insert(dup.levels.begin() + 1, def.levels[0]); // repeat G_1
    CHECK(assign_energy(dup, pair, 1).total == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("intermediate assignment levels freeze fewer arguments") {
    const DensityPair pair = make_quadratic_trace_pair();
    HierarchicalDeformation def = fixture_1d();
    // level 2 freezes only G2: |tr(G2 - grad g)| + W0(G2) = 1
    EnergyAssignment e2 = assign_energy(def, pair, 2);
    CHECK(e2.level == 2);
    CHECK(e2.total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("deformation validation") {
    HierarchicalDeformation def = fixture_1d();
    def.levels[1].pop_back();
    CHECK_THROWS_AS(def.validate(), std::invalid_argument);
}

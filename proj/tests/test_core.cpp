#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hsd/density.hpp"
#include "hsd/matrix.hpp"
#include "hsd/rng.hpp"

using namespace hsd;

TEST_CASE("vector algebra") {
    Vec a{1.0, 2.0}, b{-3.0, 0.5};
    CHECK(dot(a, b) == doctest::Approx(-2.0));
    CHECK(norm(Vec{3.0, 4.0}) == doctest::Approx(5.0));
    Vec s = a + 2.0 * b;
    CHECK(s[0] == doctest::Approx(-5.0));
    CHECK(s[1] == doctest::Approx(3.0));
}

TEST_CASE("matrix basics") {
    Matrix m{{1.0, 2.0}, {3.0, 4.0}};
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m.trace() == doctest::Approx(5.0));
    CHECK(m.frobenius() == doctest::Approx(std::sqrt(30.0)));
    Vec y = m.apply({1.0, -1.0});
    CHECK(y[0] == doctest::Approx(-1.0));
    CHECK(y[1] == doctest::Approx(-1.0));
    CHECK(Matrix::identity(3).trace() == doctest::Approx(3.0));
}

TEST_CASE("outer product and disarrangement tensor") {
    Matrix o = outer({2.0, -1.0}, {0.0, 1.0});
    CHECK(o(0, 1) == doctest::Approx(2.0));
    CHECK(o(1, 1) == doctest::Approx(-1.0));
    CHECK(o(0, 0) == doctest::Approx(0.0));

    Matrix grad{{1.0, 0.0}, {0.0, 1.0}};
    Matrix G{{0.25, 0.5}, {0.0, -1.0}};
    Matrix M = disarrangement_tensor(grad, G);
    CHECK(M(0, 0) == doctest::Approx(0.75));
    CHECK(M(0, 1) == doctest::Approx(-0.5));
    CHECK(M(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("halton sequence is deterministic and has the prefix property") {
    CHECK(halton(1, 2) == doctest::Approx(0.5));
    CHECK(halton(2, 2) == doctest::Approx(0.25));
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
    for (int i = 1; i <= 100; ++i) {
        const double v = halton_in(static_cast<std::uint64_t>(i), 0, -1.0, 1.0);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        CHECK(v == halton_in(static_cast<std::uint64_t>(i), 0, -1.0, 1.0));
    }
}

TEST_CASE("rng reproducibility") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.uniform(-1.0, 1.0) == b.uniform(-1.0, 1.0));
}

TEST_CASE("catalog densities") {
    DensityPair q = make_quadratic_trace_pair();
    Matrix A{{1.0, 2.0}, {0.0, -1.0}};
    CHECK(q.eval_bulk({0.0, 0.0}, A) == doctest::Approx(6.0));
    CHECK(q.eval_surface({0.0, 0.0}, {1.0, 1.0}, {0.0, -1.0}) == doctest::Approx(1.0));
    CHECK(q.bulk_convex);
    CHECK(q.surface_trace_type);
    CHECK(is_trace_example_pair(q));

    DensityPair p = make_pair_by_name("p-power", "norm-interfacial", 3.0, 2.0);
    CHECK(p.eval_bulk({0.0}, Matrix{{2.0}}) == doctest::Approx(8.0));
    CHECK(p.eval_surface({0.0}, {3.0, 4.0}, {1.0, 0.0}) == doctest::Approx(10.0));
    CHECK_FALSE(is_trace_example_pair(p));

    CHECK_THROWS_AS(make_pair_by_name("unknown", "trace-interfacial"), std::invalid_argument);
}

TEST_CASE("bulk gradient of the quadratic density") {
    DensityPair q = make_quadratic_trace_pair();
    REQUIRE(q.bulk_gradient.has_value());
    Matrix A{{1.0, -2.0}, {0.5, 0.0}};
    Matrix g = (*q.bulk_gradient)({0.0, 0.0}, A);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(g(i, j) == doctest::Approx(2.0 * A(i, j)));
}

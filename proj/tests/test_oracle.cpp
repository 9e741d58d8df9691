#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hsd/oracle.hpp"
#include "hsd/rng.hpp"
#include "hsd/sbv_field.hpp"

using namespace hsd;

namespace {
double W0(const Matrix& B) {
    const double f = B.frobenius();
    return f * f;
}
} // namespace

TEST_CASE("stage-1 closed form") {
    Matrix A{{1.5}};
    CHECK(oracle::exact_Wk(A, {Matrix{{0.5}}}, W0) == doctest::Approx(1.25));
    Matrix A2{{1.0, 0.0}, {0.0, 1.0}};
    Matrix B2{{0.5, 3.0}, {0.0, 0.5}};
    // trace gap 1, |B|^2 = 9.5
    CHECK(oracle::exact_Wk(A2, {B2}, W0) == doctest::Approx(10.5));
}

TEST_CASE("stage-2 closed form telescopes the trace gaps") {
    Matrix A{{2.0}}, B2{{0.5}}, B1{{-1.0}};
    // |2-0.5| + |0.5-(-1)| + 1 = 4
    CHECK(oracle::exact_Wk(A, {B2, B1}, W0) == doctest::Approx(4.0));
}

TEST_CASE("constant tuple collapses to the base density") {
    for (int i = 1; i <= 20; ++i) {
        Matrix A(2, 2);
        int d = 0;
        for (double& v : A.data()) v = halton_in(static_cast<std::uint64_t>(i), d++, -3.0, 3.0);
        for (std::size_t len = 1; len <= 3; ++len) {
            std::vector<Matrix> tuple(len, A);
            CHECK(oracle::exact_Wk(A, tuple, W0) == doctest::Approx(W0(A)));
        }
    }
}

TEST_CASE("duplicating a tuple entry does not change the value") {
    for (int i = 1; i <= 20; ++i) {
        int d = 0;
        auto mat = [&](std::uint64_t idx) {
            Matrix m(2, 2);
            for (double& v : m.data()) v = halton_in(idx, d++, -2.0, 2.0);
            return m;
        };
        const std::uint64_t idx = static_cast<std::uint64_t>(i);
        Matrix A = mat(idx), B2 = mat(idx), B1 = mat(idx);
        const double base = oracle::exact_Wk(A, {B2, B1}, W0);
        CHECK(oracle::exact_Wk(A, {B2, B2, B1}, W0) == doctest::Approx(base));
        CHECK(oracle::exact_Wk(A, {B2, B1, B1}, W0) == doctest::Approx(base));
    }
}

TEST_CASE("1-Lipschitz in the trace of the outer argument") {
    Matrix B2{{0.5, 0.0}, {0.0, 0.25}}, B1{{0.0, 1.0}, {0.0, 0.0}};
    for (int i = 1; i <= 50; ++i) {
        int d = 0;
        auto next = [&](double lo, double hi) {
            return halton_in(static_cast<std::uint64_t>(i), d++, lo, hi);
        };
        Matrix A(2, 2), Ap(2, 2);
        for (double& v : A.data()) v = next(-3.0, 3.0);
        Ap = A;
        const double dt = next(-2.0, 2.0);
        Ap(0, 0) += dt; // shifts tr(A) by dt
        const double a = oracle::exact_Wk(A, {B2, B1}, W0);
        const double b = oracle::exact_Wk(Ap, {B2, B1}, W0);
        CHECK(std::abs(a - b) <= std::abs(dt) + 1e-12);
    }
}

TEST_CASE("surface closed form is stage independent") {
    CHECK(oracle::exact_psik({1.0, 2.0}, {0.0, 1.0}) == doctest::Approx(2.0));
    CHECK(oracle::exact_psik({1.0, -1.0}, {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}) ==
          doctest::Approx(0.0));
}

TEST_CASE("fully relaxed hierarchical energy on the affine fixture") {
    SBVField g = affine_field(Grid(1, 4), Matrix{{1.0}});
    std::vector<std::vector<Matrix>> levels = {std::vector<Matrix>(4, Matrix{{0.5}}),
                                               std::vector<Matrix>(4, Matrix{{0.0}})};
    CHECK(oracle::exact_E1(g, levels, W0) == doctest::Approx(1.0).epsilon(1e-12));

    // a jump of size 2 in g adds |[g] . nu| = 2
    for (int c = 0; c < 4; ++c)
        if (g.centroid(c)[0] > 0.0) g.offset(c)[0] += 2.0;
    CHECK(oracle::exact_E1(g, levels, W0) == doctest::Approx(3.0).epsilon(1e-12));
}

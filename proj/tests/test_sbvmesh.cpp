#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hsd/density.hpp"
#include "hsd/grid.hpp"
#include "hsd/sbv_field.hpp"

using namespace hsd;

namespace {

// dense midpoint quadrature of the trace-type surface term along one face
double face_oracle(const SBVField& u, const Face& f, const DensityPair& pair, int m = 20000) {
    const Grid& g = u.grid();
    Vec j0, j1;
    u.face_jump(f, j0, j1);
    const Vec nu = g.to_physical(f.normal);
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
        const double s = (k + 0.5) / m;
        acc += pair.eval_surface(g.to_physical(f.a), j0 + s * j1, nu);
    }
    return f.measure * acc / m;
}

} // namespace

TEST_CASE("grid cell volumes tile the box") {
    for (const Grid& g : {Grid(1, 7), Grid(2, 5), Grid(2, 4, {}, {}, Matrix::identity(2), true),
                          Grid::with_boundary_layer(2, 4, 0.125, true)}) {
        double vol = 0.0;
        for (int c = 0; c < g.cell_count(); ++c) vol += g.cell(c).volume;
        CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("locate is consistent with cell geometry") {
    Grid g(2, 3, {}, {}, Matrix::identity(2), true);
    for (int c = 0; c < g.cell_count(); ++c) {
        const Cell cell = g.cell(c);
        CHECK(g.locate(cell.centroid) == c);
    }
}

TEST_CASE("rotated cube maps the first axis onto nu") {
    Vec nu{std::cos(0.7), std::sin(0.7)};
    Grid g = Grid::rotated_cube(nu, 4);
    Vec e0 = g.to_physical({1.0, 0.0});
    CHECK(e0[0] == doctest::Approx(nu[0]));
    CHECK(e0[1] == doctest::Approx(nu[1]));
}

TEST_CASE("interior faces pair adjacent cells with outward normals") {
    Grid g(2, 3);
    const auto faces = g.interior_faces();
    CHECK(static_cast<int>(faces.size()) == 2 * 3 * 2); // vertical + horizontal
    for (const Face& f : faces) {
        REQUIRE(f.minus >= 0);
        REQUIRE(f.plus >= 0);
        const Vec cm = g.cell(f.minus).centroid;
        const Vec cp = g.cell(f.plus).centroid;
        CHECK(dot(f.normal, cp - cm) > 0.0);
        CHECK(norm(f.normal) == doctest::Approx(1.0));
    }
}

TEST_CASE("affine field has no jumps and exact bulk energy") {
    DensityPair pair = make_quadratic_trace_pair();
    Matrix A{{1.0, 0.5}, {-0.25, 2.0}};
    for (bool split : {false, true}) {
        SBVField u = affine_field(Grid(2, 4, {}, {}, Matrix::identity(2), split), A);
        EnergyBreakdown e = eval_energy(u, pair, Vec{0.0, 0.0});
        CHECK(e.surface_value == doctest::Approx(0.0).epsilon(1e-14));
        const double f = A.frobenius();
        CHECK(e.bulk_value == doctest::Approx(f * f).epsilon(1e-12));
        // no jump part: the variation is purely absolutely continuous
        CHECK(total_variation(u) == doctest::Approx(f).epsilon(1e-12));
    }
}

TEST_CASE("step field pays exactly the interfacial energy of one jump") {
    DensityPair pair = make_quadratic_trace_pair();
    Vec nu{1.0, 0.0};
    SBVField u = step_field(Grid(2, 4), {0.75, -0.5}, {0.0, 0.0}, nu);
    EnergyBreakdown e = eval_energy(u, pair, Vec{0.0, 0.0});
    CHECK(e.bulk_value == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(e.surface_value == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(total_variation(u) == doctest::Approx(norm(Vec{0.75, -0.5})).epsilon(1e-12));
}

TEST_CASE("closed-form face integral matches dense quadrature") {
    DensityPair pair = make_quadratic_trace_pair();
    Grid g(2, 3);
    SBVField u(g, 2);
    // deterministic ragged data so jumps vary affinely along faces
    for (int c = 0; c < g.cell_count(); ++c) {
        u.offset(c) = {0.1 * c, -0.05 * c * c};
        u.slope(c) = Matrix{{0.2 * (c % 3), 0.3}, {-0.1, 0.05 * c}};
    }
    for (const Face& f : g.interior_faces()) {
        const double closed = face_contribution(u, f, pair, Vec{0.0, 0.0});
        CHECK(closed == doctest::Approx(face_oracle(u, f, pair)).epsilon(1e-6));
    }
}

TEST_CASE("x-dependent bulk uses quadrature exact for quadratics") {
    DensityPair pair = make_quadratic_trace_pair();
    pair.bulk = [](const Vec& x, const Matrix& A) {
        const double f = A.frobenius();
        return (1.0 + x[0] * x[0] + x[0] * x[1]) * f * f;
    };
    pair.bulk_x_dependent = true;
    Matrix A{{1.0, 0.0}, {0.0, 1.0}};
    for (bool split : {false, true}) {
        SBVField u = affine_field(Grid(2, 8, {}, {}, Matrix::identity(2), split), A);
        // integral of 1 + x^2 + xy over the centered unit square is 1 + 1/12
        CHECK(eval_energy(u, pair).bulk_value == doctest::Approx(2.0 * (1.0 + 1.0 / 12.0)).epsilon(1e-12));
    }
}

TEST_CASE("refinement preserves the field and its energy") {
    DensityPair pair = make_quadratic_trace_pair();
    Grid g(2, 2);
    SBVField u(g, 2);
    for (int c = 0; c < g.cell_count(); ++c) {
        u.offset(c) = {0.3 * c, 0.1};
        u.slope(c) = Matrix{{1.0, 0.1 * c}, {0.0, -0.5}};
    }
    SBVField r = refine(u, 3);
    CHECK(r.grid().cells_per_side() == 6);
    EnergyBreakdown a = eval_energy(u, pair, Vec{0.0, 0.0});
    EnergyBreakdown b = eval_energy(r, pair, Vec{0.0, 0.0});
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-12));
    CHECK(l1_norm(field_sum(r, refine(u, 3), -1.0)) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("l1 norm is exact for 1d fields") {
    // u(x) = x on (-1/2, 1/2): integral of |x| is 1/4
    SBVField u = affine_field(Grid(1, 5), Matrix{{1.0}});
    CHECK(l1_norm(u) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("graded and split grids are rejected by refine") {
    SBVField u(Grid::with_boundary_layer(2, 4, 0.125), 1);
    CHECK_THROWS_AS(refine(u, 2), std::invalid_argument);
    SBVField v(Grid(2, 2, {}, {}, Matrix::identity(2), true), 1);
    CHECK_THROWS_AS(refine(v, 2), std::invalid_argument);
}

#include <doctest.h>

#include <cmath>
#include <map>

#include "stokesband/errors.hpp"
#include "stokesband/fem.hpp"
#include "stokesband/solver.hpp"

using namespace stokesband;

namespace {

std::array<double, 2> zero_vec(double, double) { return {0.0, 0.0}; }

StokesSystem assemble_square(const Mesh& mesh, double fy = 0.0) {
    return assemble_stokes(mesh, [fy](double, double) { return std::array<double, 2>{0.0, fy}; });
}

} // namespace

TEST_CASE("velocity dirichlet elimination bookkeeping") {
    Mesh m = generate_unit_square_mesh(4);
    StokesSystem sys = assemble_square(m);

    VelocitySystem vs0 = apply_velocity_dirichlet(sys, zero_vec);
    for (int d = 0; d < sys.dofs.dof_count(); ++d)
        if (sys.velocity_dof_on_boundary(d)) {
            CHECK(vs0.velocity_values[2 * d] == 0.0);
            CHECK(vs0.velocity_values[2 * d + 1] == 0.0);
        }
    // with g = 0 the lifted load equals the restriction of f
    for (size_t i = 0; i < vs0.free_velocity.size(); ++i)
        CHECK(vs0.f_free[i] == sys.f_vec[vs0.free_velocity[i]]);

    VelocitySystem vsc = apply_velocity_dirichlet(sys, [](double, double) {
        return std::array<double, 2>{2.5, -1.0};
    });
    for (int d = 0; d < sys.dofs.dof_count(); ++d)
        if (sys.velocity_dof_on_boundary(d)) {
            CHECK(vsc.velocity_values[2 * d] == 2.5);
            CHECK(vsc.velocity_values[2 * d + 1] == -1.0);
        }

    // boundary data value at the corner (1,1) is analytically zero
    VelocitySystem vss = apply_velocity_dirichlet(sys, [](double x, double y) {
        double s = std::sin(2.0 * M_PI * x * y);
        return std::array<double, 2>{x * s, s};
    });
    int corner = m.vertex_count() - 1; // top-right vertex of the grid ordering
    CHECK(m.vertices[corner].x == 1.0);
    CHECK(m.vertices[corner].y == 1.0);
    CHECK(std::abs(vss.velocity_values[2 * corner]) < 1e-14);
    CHECK(std::abs(vss.velocity_values[2 * corner + 1]) < 1e-14);
}

TEST_CASE("pressure constraint bookkeeping") {
    Mesh m = generate_unit_square_mesh(2);
    StokesSystem sys = assemble_square(m);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);

    ConstrainedSystem zm = apply_pressure_constraint(vs, ZeroMean{});
    // dimension = 2 * free P2 dofs + all pressure dofs + 1 multiplier
    int free_p2 = 0;
    for (int d = 0; d < sys.dofs.dof_count(); ++d)
        if (!sys.velocity_dof_on_boundary(d)) ++free_p2;
    CHECK(zm.K.rows() == 2 * free_p2 + m.vertex_count() + 1);
    CHECK(zm.has_multiplier);

    // multiplier column entries sum to |Omega| = 1
    double msum = 0.0;
    for (int i = 0; i < zm.K.rows(); ++i) msum += zm.K.coeff(i, zm.K.rows() - 1);
    CHECK(msum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(zm.K.asymmetry() < 1e-12);

    Mesh m4 = generate_unit_square_mesh(4);
    StokesSystem sys4 = assemble_square(m4);
    VelocitySystem vs4 = apply_velocity_dirichlet(sys4, zero_vec);
    RegionMask layer = select_region(m4, LayerBand{1});
    ConstrainedSystem band = apply_pressure_constraint(vs4, BandZero{layer, nullptr});
    // free pressure dofs are exactly the vertices untouched by masked triangles
    CHECK(band.free_pressure.size() ==
          m4.vertices.size() - layer.constrained_vertices.size());
    CHECK(static_cast<int>(band.free_pressure.size()) == 1);
    CHECK(band.K.asymmetry() < 1e-12);

    ConstrainedSystem zm4 = apply_pressure_constraint(vs4, ZeroMean{});
    CHECK(band.K.rows() ==
          zm4.K.rows() - static_cast<int>(layer.constrained_vertices.size()) - 1);

    RegionMask whole = select_region(m4, BoundaryBand{5.0});
    CHECK_THROWS_AS(apply_pressure_constraint(vs4, BandZero{whole, nullptr}),
                    over_constrained_error);
    CHECK_THROWS_AS(apply_pressure_constraint(vs4, BandZero{RegionMask{}, nullptr}),
                    empty_selection_error);
}

TEST_CASE("zero data gives the zero solution") {
    Mesh m = generate_unit_square_mesh(4);
    StokesSystem sys = assemble_square(m, 0.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    Solution sol = solve_stokes(apply_pressure_constraint(vs, ZeroMean{}));
    for (double v : sol.u.coeffs) CHECK(std::abs(v) < 1e-12);
    for (double v : sol.p.coeffs) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("hydrostatic solution is exact") {
    Mesh m = generate_unit_square_mesh(16);
    StokesSystem sys = assemble_square(m, -1.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    Solution sol = solve_stokes(apply_pressure_constraint(vs, ZeroMean{}));
    CHECK(sol.diagnostics.residual < 1e-9);

    // u = 0 and p = 1/2 - y solve the problem exactly
    for (double v : sol.u.coeffs) CHECK(std::abs(v) < 1e-8);
    double perr = pressure_error_l2(sol.p, [](double, double y) { return 0.5 - y; });
    CHECK(perr < 1e-8);

    // the zero-mean constraint holds in quadrature
    auto mp = sys.Mp.multiply(sol.p.coeffs);
    double mean = 0.0;
    for (double v : mp) mean += v;
    CHECK(std::abs(mean) < 1e-10 * field_norm(sol.p, NormKind::L2) + 1e-14);
}

TEST_CASE("band pressure values are imposed exactly") {
    Mesh m = generate_unit_square_mesh(8);
    StokesSystem sys = assemble_square(m, -1.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    RegionMask layer = select_region(m, LayerBand{1});
    auto g = [](double x, double y) { return 0.3 * x - 0.1 * y + 0.05; };
    Solution sol = solve_stokes(apply_pressure_constraint(vs, BandZero{layer, g}));
    for (int v : layer.constrained_vertices)
        CHECK(sol.p.coeffs[v] == g(m.vertices[v].x, m.vertices[v].y));
}

TEST_CASE("discrete incompressibility against the constrained space") {
    Mesh m = generate_unit_square_mesh(8);
    StokesSystem sys = assemble_square(m, -1.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    RegionMask layer = select_region(m, LayerBand{1});
    ConstrainedSystem cs = apply_pressure_constraint(vs, BandZero{layer, nullptr});
    Solution sol = solve_stokes(cs);
    auto bu = sys.B.multiply(sol.u.coeffs);
    for (int idx : cs.free_pressure) CHECK(std::abs(bu[idx]) < 1e-10);
}

TEST_CASE("boundary flux vanishes for zero-net-flux data") {
    Mesh m = generate_unit_square_mesh(12);
    StokesSystem sys = assemble_square(m, -1.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, [](double x, double y) {
        double s = std::sin(2.0 * M_PI * x * y);
        return std::array<double, 2>{x * s, s};
    });
    Solution sol = solve_stokes(apply_pressure_constraint(vs, ZeroMean{}));
    RegionMask layer = select_region(m, LayerBand{1});
    auto metrics = divergence_metrics(m, sol.u, layer);
    CHECK(metrics.abs_integral <= 1e-10 * field_norm(sol.u, NormKind::H1Semi));
}

TEST_CASE("mode equivalence on the common solution") {
    Mesh m = generate_unit_square_mesh(8);
    StokesSystem sys = assemble_square(m, -1.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    Solution zm = solve_stokes(apply_pressure_constraint(vs, ZeroMean{}));

    RegionMask layer = select_region(m, LayerBand{1});
    std::map<std::pair<double, double>, double> trace;
    for (int v : layer.constrained_vertices)
        trace[{m.vertices[v].x, m.vertices[v].y}] = zm.p.coeffs[v];
    Solution band = solve_stokes(apply_pressure_constraint(
        vs, BandZero{layer, [trace](double x, double y) { return trace.at({x, y}); }}));

    DiscreteField diff = band.u;
    for (size_t i = 0; i < diff.coeffs.size(); ++i) diff.coeffs[i] -= zm.u.coeffs[i];
    CHECK(field_norm(diff, NormKind::H1Semi) < 1e-8);
}

TEST_CASE("point constraint solves and matrix stays symmetric") {
    Mesh m = generate_unit_square_mesh(6);
    StokesSystem sys = assemble_square(m, -1.0);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    ConstrainedSystem cs = apply_pressure_constraint(vs, PointZero{0, 0.0});
    CHECK(cs.K.asymmetry() < 1e-12);
    Solution sol = solve_stokes(cs);
    CHECK(sol.p.coeffs[0] == 0.0);
    CHECK(sol.diagnostics.residual < 1e-9);
}

TEST_CASE("constrained matrix accessor") {
    Mesh m = generate_unit_square_mesh(4);
    StokesSystem sys = assemble_square(m);
    VelocitySystem vs = apply_velocity_dirichlet(sys, zero_vec);
    ConstrainedSystem cs = apply_pressure_constraint(vs, ZeroMean{});
    const SparseMatrix& K = constrained_matrix(cs);
    CHECK(K.rows() == cs.K.rows());
    CHECK(K.asymmetry() < 1e-12);
}

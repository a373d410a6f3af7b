#include "stokesband/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "stokesband/errors.hpp"

namespace stokesband {

std::string to_string(ConstraintMode mode) {
    switch (mode) {
        case ConstraintMode::ZeroMean: return "zero_mean";
        case ConstraintMode::BandZero: return "band_zero";
        case ConstraintMode::BoundaryZero: return "boundary_zero";
        case ConstraintMode::PointZero: return "point_zero";
    }
    return "unknown";
}

ConstraintMode mode_of(const PressureConstraint& constraint) {
    if (std::holds_alternative<ZeroMean>(constraint)) return ConstraintMode::ZeroMean;
    if (std::holds_alternative<BandZero>(constraint)) return ConstraintMode::BandZero;
    if (std::holds_alternative<BoundaryZero>(constraint)) return ConstraintMode::BoundaryZero;
    return ConstraintMode::PointZero;
}

VelocitySystem apply_velocity_dirichlet(const StokesSystem& sys, const VectorFunction& g) {
    VelocitySystem vs;
    vs.sys = &sys;
    const int nv = sys.n_velocity_dofs();
    const int n2 = sys.dofs.dof_count();

    vs.velocity_values.assign(nv, 0.0);
    vs.velocity_free_idx.assign(nv, -1);
    std::vector<char> fixed(nv, 0);
    for (int d = 0; d < n2; ++d) {
        if (!sys.velocity_dof_on_boundary(d)) continue;
        Vec2 p = sys.velocity_dof_position(d);
        auto val = g(p.x, p.y);
        fixed[2 * d] = fixed[2 * d + 1] = 1;
        vs.velocity_values[2 * d] = val[0];
        vs.velocity_values[2 * d + 1] = val[1];
    }
    for (int i = 0; i < nv; ++i)
        if (!fixed[i]) {
            vs.velocity_free_idx[i] = static_cast<int>(vs.free_velocity.size());
            vs.free_velocity.push_back(i);
        }
    const int nf = static_cast<int>(vs.free_velocity.size());

    // A restricted to free dofs; lifted load f_f - A_fc * g_c.
    vs.f_free.resize(nf);
    for (int i = 0; i < nf; ++i) vs.f_free[i] = sys.f_vec[vs.free_velocity[i]];
    TripletBuilder a_trip(nf, nf);
    {
        auto rp = sys.A.row_offsets();
        auto ci = sys.A.col_indices();
        auto va = sys.A.values();
        for (int i = 0; i < nv; ++i) {
            int fi = vs.velocity_free_idx[i];
            if (fi < 0) continue;
            for (int k = rp[i]; k < rp[i + 1]; ++k) {
                int j = ci[k];
                int fj = vs.velocity_free_idx[j];
                if (fj >= 0)
                    a_trip.add(fi, fj, va[k]);
                else
                    vs.f_free[fi] -= va[k] * vs.velocity_values[j];
            }
        }
    }
    vs.A_ff = a_trip.compress();

    // B restricted to free columns; fixed columns move to the continuity rhs.
    const int np = sys.n_pressure_dofs();
    vs.continuity_rhs.assign(np, 0.0);
    TripletBuilder b_trip(np, nf);
    {
        auto rp = sys.B.row_offsets();
        auto ci = sys.B.col_indices();
        auto vb = sys.B.values();
        for (int i = 0; i < np; ++i) {
            for (int k = rp[i]; k < rp[i + 1]; ++k) {
                int j = ci[k];
                int fj = vs.velocity_free_idx[j];
                if (fj >= 0)
                    b_trip.add(i, fj, vb[k]);
                else
                    vs.continuity_rhs[i] -= vb[k] * vs.velocity_values[j];
            }
        }
    }
    vs.B_f = b_trip.compress();
    return vs;
}

ConstrainedSystem apply_pressure_constraint(const VelocitySystem& vs,
                                            const PressureConstraint& constraint) {
    const StokesSystem& sys = *vs.sys;
    const Mesh& mesh = *sys.mesh;
    const int np = sys.n_pressure_dofs();
    const int nf = static_cast<int>(vs.free_velocity.size());

    ConstrainedSystem cs;
    cs.sys = &sys;
    cs.free_velocity = vs.free_velocity;
    cs.velocity_values = vs.velocity_values;
    cs.mode = mode_of(constraint);
    cs.pressure_values.assign(np, 0.0);
    cs.pressure_fixed.assign(np, 0);

    auto fix_vertex = [&](int v, double value) {
        if (v < 0 || v >= np) throw std::out_of_range("pressure vertex out of range");
        cs.pressure_fixed[v] = 1;
        cs.pressure_values[v] = value;
    };

    if (const auto* band = std::get_if<BandZero>(&constraint)) {
        if (band->mask.empty()) throw empty_selection_error("BandZero mask is empty");
        for (int v : band->mask.constrained_vertices)
            fix_vertex(v, band->data ? band->data(mesh.vertices[v].x, mesh.vertices[v].y) : 0.0);
    } else if (const auto* bz = std::get_if<BoundaryZero>(&constraint)) {
        for (int v : mesh.boundary_vertices)
            fix_vertex(v, bz->data ? bz->data(mesh.vertices[v].x, mesh.vertices[v].y) : 0.0);
    } else if (const auto* pz = std::get_if<PointZero>(&constraint)) {
        fix_vertex(pz->vertex, pz->value);
    } else {
        cs.has_multiplier = true;
    }

    for (int v = 0; v < np; ++v)
        if (!cs.pressure_fixed[v]) cs.free_pressure.push_back(v);
    if (cs.free_pressure.empty())
        throw over_constrained_error("pressure constraint eliminates every pressure dof");
    const int npf = static_cast<int>(cs.free_pressure.size());
    std::vector<int> pressure_free_idx(np, -1);
    for (int i = 0; i < npf; ++i) pressure_free_idx[cs.free_pressure[i]] = i;

    const int dim = nf + npf + (cs.has_multiplier ? 1 : 0);
    cs.rhs.assign(dim, 0.0);
    for (int i = 0; i < nf; ++i) cs.rhs[i] = vs.f_free[i];

    TripletBuilder k_trip(dim, dim);
    {
        auto rp = vs.A_ff.row_offsets();
        auto ci = vs.A_ff.col_indices();
        auto va = vs.A_ff.values();
        for (int i = 0; i < nf; ++i)
            for (int k = rp[i]; k < rp[i + 1]; ++k) k_trip.add(i, ci[k], va[k]);
    }
    {
        auto rp = vs.B_f.row_offsets();
        auto ci = vs.B_f.col_indices();
        auto vb = vs.B_f.values();
        for (int i = 0; i < np; ++i) {
            int pi = pressure_free_idx[i];
            if (pi >= 0) {
                for (int k = rp[i]; k < rp[i + 1]; ++k) {
                    k_trip.add(nf + pi, ci[k], vb[k]);           // continuity row
                    k_trip.add(ci[k], nf + pi, vb[k]);           // B^T column
                }
                cs.rhs[nf + pi] = vs.continuity_rhs[i];
            } else {
                // eliminated pressure dof: its value lifts the velocity rows
                double pv = cs.pressure_values[i];
                if (pv != 0.0)
                    for (int k = rp[i]; k < rp[i + 1]; ++k) cs.rhs[ci[k]] -= vb[k] * pv;
            }
        }
    }
    if (cs.has_multiplier) {
        // multiplier column entries are (psi_i, 1) = Mp row sums
        auto rp = sys.Mp.row_offsets();
        auto vm = sys.Mp.values();
        for (int i = 0; i < np; ++i) {
            double row_sum = 0.0;
            for (int k = rp[i]; k < rp[i + 1]; ++k) row_sum += vm[k];
            k_trip.add(nf + i, dim - 1, row_sum);
            k_trip.add(dim - 1, nf + i, row_sum);
        }
    }
    cs.K = k_trip.compress();
    return cs;
}

Solution solve_stokes(const ConstrainedSystem& cs) {
    const StokesSystem& sys = *cs.sys;
    Solution sol;
    sol.diagnostics.dimension = cs.K.rows();

    Factorization fact(cs.K); // singular_matrix_error propagates
    sol.diagnostics.factorized = true;
    std::vector<double> x = fact.solve(cs.rhs);

    auto Kx = cs.K.multiply(x);
    double rnorm = 0.0, bnorm = 0.0;
    for (size_t i = 0; i < Kx.size(); ++i) {
        rnorm += (Kx[i] - cs.rhs[i]) * (Kx[i] - cs.rhs[i]);
        bnorm += cs.rhs[i] * cs.rhs[i];
    }
    sol.diagnostics.residual = bnorm > 0.0 ? std::sqrt(rnorm / bnorm) : std::sqrt(rnorm);

    const int nf = static_cast<int>(cs.free_velocity.size());
    sol.u.space = FieldSpace::P2Vector;
    sol.u.mesh = sys.mesh;
    sol.u.coeffs = cs.velocity_values;
    for (int i = 0; i < nf; ++i) sol.u.coeffs[cs.free_velocity[i]] = x[i];

    sol.p.space = FieldSpace::P1Scalar;
    sol.p.mesh = sys.mesh;
    sol.p.coeffs = cs.pressure_values;
    for (size_t i = 0; i < cs.free_pressure.size(); ++i)
        sol.p.coeffs[cs.free_pressure[i]] = x[nf + i];
    if (cs.has_multiplier) sol.diagnostics.multiplier = x.back();
    return sol;
}

void write_solution_summary(const Solution& sol, const std::string& path) {
    nlohmann::json j;
    j["velocity_l2"] = field_norm(sol.u, NormKind::L2);
    j["velocity_h1_semi"] = field_norm(sol.u, NormKind::H1Semi);
    j["pressure_l2"] = field_norm(sol.p, NormKind::L2);
    j["residual"] = sol.diagnostics.residual;
    j["dimension"] = sol.diagnostics.dimension;
    j["factorized"] = sol.diagnostics.factorized;
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

} // namespace stokesband

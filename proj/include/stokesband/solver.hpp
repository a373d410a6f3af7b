#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stokesband/fem.hpp"
#include "stokesband/linalg.hpp"
#include "stokesband/mesh.hpp"

namespace stokesband {

// Pressure constraint variants. ZeroMean appends a Lagrange multiplier row
// whose entries are the Mp row sums, so the mean is enforced exactly in
// quadrature. The other three eliminate pressure dofs strongly, with the
// right-hand side lifted by the prescribed values.
struct ZeroMean {};
struct BandZero {
    RegionMask mask;
    ScalarFunction data; // null means homogeneous
};
struct BoundaryZero {
    ScalarFunction data;
};
struct PointZero {
    int vertex = 0;
    double value = 0.0;
};
using PressureConstraint = std::variant<ZeroMean, BandZero, BoundaryZero, PointZero>;

enum class ConstraintMode { ZeroMean, BandZero, BoundaryZero, PointZero };
std::string to_string(ConstraintMode mode);
ConstraintMode mode_of(const PressureConstraint& constraint);

/// Stokes blocks after symmetric elimination of the boundary velocity dofs.
struct VelocitySystem {
    const StokesSystem* sys = nullptr;
    std::vector<int> free_velocity;     // free index -> full velocity dof
    std::vector<int> velocity_free_idx; // full velocity dof -> free index or -1
    std::vector<double> velocity_values; // prescribed value per full velocity dof (0 when free)
    SparseMatrix A_ff;                  // free x free
    SparseMatrix B_f;                   // all pressure rows x free velocity columns
    std::vector<double> f_free;         // lifted load
    std::vector<double> continuity_rhs; // -B_fixed * g per pressure row
};

VelocitySystem apply_velocity_dirichlet(const StokesSystem& sys, const VectorFunction& g);

struct ConstrainedSystem {
    SparseMatrix K;
    std::vector<double> rhs;
    const StokesSystem* sys = nullptr;
    std::vector<int> free_velocity;
    std::vector<double> velocity_values;
    std::vector<int> free_pressure;      // free index -> pressure vertex
    std::vector<double> pressure_values; // prescribed value per vertex (0 when free)
    std::vector<char> pressure_fixed;
    bool has_multiplier = false;
    ConstraintMode mode = ConstraintMode::ZeroMean;
};

ConstrainedSystem apply_pressure_constraint(const VelocitySystem& vs,
                                            const PressureConstraint& constraint);

struct SolveDiagnostics {
    double residual = 0.0; // ||K x - rhs|| / ||rhs||
    double multiplier = 0.0;
    int dimension = 0;
    bool factorized = false;
};

struct Solution {
    DiscreteField u;
    DiscreteField p;
    SolveDiagnostics diagnostics;
};

Solution solve_stokes(const ConstrainedSystem& cs);

inline const SparseMatrix& constrained_matrix(const ConstrainedSystem& cs) { return cs.K; }

/// Summary JSON (norms and diagnostics) next to per-dof CSV exports.
void write_solution_summary(const Solution& sol, const std::string& path);

} // namespace stokesband

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stokesband/linalg.hpp"
#include "stokesband/mesh.hpp"
#include "stokesband/quadrature.hpp"

namespace stokesband {

enum class BasisFamily { P1, P2 };

struct BasisEval {
    std::vector<double> values;
    std::vector<Vec2> gradients; // reference gradients
};

/// Lagrange basis on the reference triangle. P1 returns 3 values/gradients,
/// P2 returns 6 (vertices then edge midpoints 01, 12, 20). Values form a
/// partition of unity. Throws out_of_domain_error outside the closed triangle.
BasisEval eval_basis(BasisFamily family, Vec2 point);

/// Global dof numbering for the scalar P2 space: vertex dofs first, then one
/// dof per edge. Edges are keyed by sorted vertex pair.
struct P2DofMap {
    int n_vertices = 0;
    int n_edges = 0;
    std::vector<std::array<int, 3>> triangle_edges; // global edge ids per triangle (local edges 01, 12, 20)
    std::vector<std::array<int, 2>> edge_vertices;  // sorted endpoint pair per edge
    std::vector<char> edge_on_boundary;             // edge belongs to exactly one triangle

    int dof_count() const { return n_vertices + n_edges; }
    explicit P2DofMap(const Mesh& mesh);
    P2DofMap() = default;
};

using VectorFunction = std::function<std::array<double, 2>(double, double)>;
using ScalarFunction = std::function<double(double, double)>;

/// Assembled Stokes blocks. A is the velocity Laplacian (size 2*N2), B encodes
/// -(q, div v) (size N1 x 2*N2), Mp is the P1 mass matrix. Velocity dofs are
/// interleaved: dof 2*d is the x-component, 2*d+1 the y-component.
struct StokesSystem {
    const Mesh* mesh = nullptr;
    P2DofMap dofs;
    SparseMatrix A;
    SparseMatrix B;
    SparseMatrix Mp;
    std::vector<double> f_vec;

    int n_velocity_dofs() const { return 2 * dofs.dof_count(); }
    int n_pressure_dofs() const { return dofs.n_vertices; }
    Vec2 velocity_dof_position(int scalar_dof) const;
    bool velocity_dof_on_boundary(int scalar_dof) const;
};

StokesSystem assemble_stokes(const Mesh& mesh, const VectorFunction& load);

/// P1 mass matrix alone (no velocity blocks).
SparseMatrix assemble_pressure_mass(const Mesh& mesh);

enum class FieldSpace { P2Vector, P1Scalar };

struct DiscreteField {
    FieldSpace space = FieldSpace::P1Scalar;
    std::vector<double> coeffs;
    const Mesh* mesh = nullptr;
};

DiscreteField interpolate_p1(const Mesh& mesh, const ScalarFunction& f);
DiscreteField interpolate_p2_vector(const Mesh& mesh, const P2DofMap& dofs,
                                    const VectorFunction& f);

enum class NormKind { L1, L2, H1Semi };

/// Quadrature norm of a field, optionally restricted to the masked triangles.
double field_norm(const DiscreteField& field, NormKind kind,
                  const std::optional<RegionMask>& mask = std::nullopt);

struct DivergenceMetrics {
    double l1_omega = 0.0;
    double l2_omega = 0.0;
    double l2_mask = 0.0;
    double l2_complement = 0.0;
    double abs_integral = 0.0;
};

DivergenceMetrics divergence_metrics(const Mesh& mesh, const DiscreteField& u,
                                     const RegionMask& mask);

/// Pointwise evaluation; the triangle is located by walking a cached spatial
/// bucket grid. Returns (value_x, value_y) for P2 fields, (value, 0) for P1.
class FieldEvaluator {
  public:
    FieldEvaluator(const Mesh& mesh, const P2DofMap* dofs);
    std::array<double, 2> velocity(const DiscreteField& u, Vec2 p) const;
    double pressure(const DiscreteField& q, Vec2 p) const;
    int locate(Vec2 p) const; // -1 if outside every triangle

  private:
    const Mesh* mesh_;
    const P2DofMap* dofs_;
    double xmin_, ymin_, cell_;
    int nx_, ny_;
    std::vector<std::vector<int>> buckets_;
};

/// CSV export, one row per dof with coordinates and value(s).
void write_field_csv(const DiscreteField& field, const P2DofMap* dofs,
                     const std::string& path);

// Quadrature error norms against analytic reference fields (degree-6 rule).
double velocity_error_l2(const DiscreteField& u, const VectorFunction& exact);
double velocity_error_h1semi(const DiscreteField& u, const VectorFunction& exact_grad_u1,
                             const VectorFunction& exact_grad_u2);
double pressure_error_l2(const DiscreteField& p, const ScalarFunction& exact);

} // namespace stokesband

#pragma once

#include <string>
#include <vector>

#include "stokesband/fem.hpp"
#include "stokesband/linalg.hpp"
#include "stokesband/mesh.hpp"
#include "stokesband/solver.hpp"

namespace stokesband {

enum class EstimateKind { CDeltaRatio, InfSupBeta, NecasQuotient };

struct ConstantEstimate {
    double value = 0.0;
    EstimateKind kind = EstimateKind::CDeltaRatio;
    double h = 0.0;            // 0 for the analytic path
    double delta_volume = 0.0;
    double diameter_spec = 0.0;
    std::string function_id;
};

void write_estimates_csv(const std::vector<ConstantEstimate>& estimates, const std::string& path);

/// Zeroes every dof in mask.constrained_vertices; the result vanishes on all
/// masked triangles.
DiscreteField apply_P(const DiscreteField& p, const RegionMask& mask);

/// Subtracts the mass-weighted mean: q - (1^T Mp q) / |Omega|.
DiscreteField apply_T(const DiscreteField& p, const SparseMatrix& Mp);

/// Mass-weighted L2 inner product restricted to the triangles NOT in `mask`
/// (the whole mesh when mask is empty). Exact for P1 arguments.
double masked_l2_inner(const DiscreteField& f, const DiscreteField& g, const RegionMask& mask);

/// ||T(P p)|| / ||P p|| with P acting as the exact indicator of the unmasked
/// triangles, so a constant input reproduces sqrt(|Delta|/|Omega|) exactly.
/// Throws degenerate_input_error when P p vanishes.
ConstantEstimate c_delta_ratio(const DiscreteField& p, const RegionMask& mask);

/// Discrete H^{-1} norm of grad(p): one Riesz solve A w = B^T p on the
/// zero-trace velocity space, value sqrt(w^T A w). Reuses the factorization
/// across calls.
class RieszSolver {
  public:
    explicit RieszSolver(const VelocitySystem& vs);
    double grad_hminus1_norm(const DiscreteField& p) const;
    const Factorization& velocity_factorization() const { return fact_; }
    const VelocitySystem& system() const { return *vs_; }

  private:
    const VelocitySystem* vs_;
    Factorization fact_;
};

double grad_hminus1_norm(const VelocitySystem& vs, const DiscreteField& p);

/// Nechas quotient ||p|| / ||grad p||_{H^-1} for a zero-mean field.
double necas_quotient(const RieszSolver& riesz, const SparseMatrix& Mp, const DiscreteField& p);

/// Discrete inf-sup constant: beta_h = sqrt(lambda_min) of
/// (B_c A^{-1} B_c^T) q = lambda M_c q on the constrained pressure space.
/// ZeroMean restricts by deflating the constant vector.
ConstantEstimate discrete_infsup(const StokesSystem& sys, const PressureConstraint& constraint);

// ---- Analytic path for the C_Delta sweep --------------------------------
//
// High-accuracy polar quadrature on the unit disk with either a concentric
// Delta-disk or a boundary Delta-ring, so |Delta| can go far below mesh
// resolution. Constant test functions reduce to the closed form
// sqrt(|Delta|/|Omega|).

enum class AnalyticRegion { CenterDisk, BoundaryRing };

struct AnalyticRatioResult {
    double ratio = 0.0;
    double delta_volume = 0.0;
};

/// `f` is evaluated in Cartesian coordinates; `param` is the disk radius for
/// CenterDisk and the ring width for BoundaryRing. If `subtract_mean_first`
/// is set, the whole-domain mean is removed from f before masking (the T P
/// composition used by the p5 test function).
AnalyticRatioResult analytic_cdelta_ratio(const ScalarFunction& f, AnalyticRegion region,
                                          double param, bool constant_function,
                                          bool subtract_mean_first);

} // namespace stokesband

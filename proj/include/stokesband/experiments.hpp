#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stokesband/fem.hpp"
#include "stokesband/mesh.hpp"
#include "stokesband/operators.hpp"
#include "stokesband/solver.hpp"

namespace stokesband {

struct FittedRate {
    std::string label;
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0; // RMS residual in log10 space
    int points = 0;
    bool reliable = true;  // residual <= 0.1
};

/// Least-squares slope of log10 y vs log10 x, optionally restricted to
/// x in [window.first, window.second]. Requires >= 3 positive points.
FittedRate fit_loglog_rate(const std::vector<std::pair<double, double>>& points,
                           const std::string& label = "",
                           std::optional<std::pair<double, double>> window = std::nullopt);

struct ExperimentReport {
    std::string experiment;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> status; // empty string per row means ok
    std::vector<FittedRate> rates;
    std::map<std::string, double> meta;
    std::string domain;
    double wall_seconds = 0.0;
    int workers = 1;

    void add_row(std::vector<double> row, std::string row_status = "");
    int column_index(const std::string& name) const;
    bool has_failures() const;
};

enum class ReportFormat { Csv, Json };
void write_report(const ExperimentReport& report, ReportFormat format, const std::string& path);
ExperimentReport read_report_json(const std::string& path);

/// Velocity/pressure perturbation recipe: delta * cos(4 pi x1 x2),
/// normalized by the max of |cos| over a 512^2 sample of the subdomain.
/// delta = 0 reproduces the data bit for bit.
struct PerturbationSpec {
    double delta = 0.0;
    double normalizer = 1.0;
    double operator()(double x, double y) const;
};
PerturbationSpec make_coupling_perturbation(double delta, Vec2 sub_center, double sub_radius);

// ---- C_Delta sweep --------------------------------------------------------

struct CDeltaSweepConfig {
    std::string domain = "disk"; // disk | square (discrete path domain)
    std::vector<int> functions = {1, 2, 3, 4, 5};
    std::vector<double> delta_volumes; // strictly decreasing; defaults filled when empty
    AnalyticRegion analytic_region = AnalyticRegion::CenterDisk;
    bool discrete_path = true;
    bool analytic_path = true;
    int disk_radial = 24;
    int disk_angular = 96;
    int square_n = 32;
    int workers = 1;
};

ExperimentReport run_cdelta_sweep(const CDeltaSweepConfig& config);

// ---- condition-number sweep ------------------------------------------------

enum class SweepAxis { Mesh, Delta };

struct ConditionSweepConfig {
    SweepAxis axis = SweepAxis::Mesh;
    std::vector<ConstraintMode> modes = {ConstraintMode::ZeroMean, ConstraintMode::BoundaryZero,
                                         ConstraintMode::BandZero};
    // mesh axis. The square family keeps element shape uniform under
    // refinement; polar disk fans develop needle elements at the center that
    // pollute the growth exponents.
    std::string mesh_domain = "square"; // square | disk
    std::vector<int> square_sizes = {6, 8, 10, 12, 16};
    std::vector<std::pair<int, int>> disk_sizes = {{3, 12}, {4, 16}, {5, 20}, {6, 24}, {8, 32}};
    bool band_fixed_width = false; // use a fixed-width BoundaryBand instead of LayerBand{1}
    // delta axis: fixed disk mesh, Delta disks centered at (1,0); radii start
    // inside the asymptotic regime (kappa is flat while the A-block dominates)
    int disk_radial = 8;
    int disk_angular = 32;
    std::vector<double> delta_radii = {0.45, 0.35, 0.28, 0.22, 0.18, 0.15};
    int dense_limit = 3000;
    int workers = 1;
};

ExperimentReport run_condition_sweep(const ConditionSweepConfig& config);

// ---- model coupling ---------------------------------------------------------

struct CouplingConfig {
    SweepAxis axis = SweepAxis::Mesh;
    std::vector<double> deltas = {1e-2, 2.0};
    std::vector<int> mesh_sizes = {16, 24, 32, 48}; // global square n
    std::vector<int> band_layers = {0, 2, 4, 8};    // 0 means BoundaryZero
    bool include_fixed_band = true;                 // BoundaryBand of fixed width
    double fixed_band_width = 0.05;
    bool include_zero_mean = true;
    // delta axis
    int fixed_mesh_n = 48;
    std::vector<double> band_widths = {0.08, 0.06, 0.045, 0.034, 0.025, 0.019};
    std::string export_dir; // when set, merged-solution CSVs are written here
    int export_samples = 96;
    int workers = 1;
};

ExperimentReport run_coupling_experiment(const CouplingConfig& config);

// ---- divergence sweep -------------------------------------------------------

struct DivergenceSweepConfig {
    std::vector<double> deltas = {1e-3, 2.0};
    int mesh_n = 64;
    std::vector<double> band_widths = {0.18, 0.12, 0.08, 0.05, 0.03, 0.02};
    int workers = 1;
};

ExperimentReport run_divergence_sweep(const DivergenceSweepConfig& config);

// ---- manufactured-solution convergence --------------------------------------

// The pressure error rides a superconvergent transient on coarse structured
// meshes; the asymptotic order-2 regime starts around n = 24.
struct ConvergenceConfig {
    std::vector<int> mesh_sizes = {24, 32, 48, 64};
    bool with_band_variant = true; // re-solve with BandZero data from the zero-mean pressure
    int workers = 1;
};

ExperimentReport run_manufactured_convergence(const ConvergenceConfig& config);

// ---- inf-sup study -----------------------------------------------------------

struct InfSupConfig {
    std::vector<int> square_sizes = {8, 16};       // ZeroMean stability check
    std::vector<int> band_sizes = {8, 12, 16};     // BandZero with a fixed physical band
    double fixed_band_width = 0.15;
    int disk_radial = 12;
    int disk_angular = 48;
    std::vector<double> disk_radii = {0.55, 0.4, 0.3, 0.22, 0.16, 0.12}; // shrinking central Delta
    int workers = 1;
};

ExperimentReport run_infsup_study(const InfSupConfig& config);

// Exact manufactured fields (stream function sin^2(pi x) sin^2(pi y)).
namespace manufactured {
std::array<double, 2> velocity(double x, double y);
std::array<double, 2> grad_u1(double x, double y);
std::array<double, 2> grad_u2(double x, double y);
double pressure(double x, double y);
std::array<double, 2> forcing(double x, double y);
} // namespace manufactured

} // namespace stokesband

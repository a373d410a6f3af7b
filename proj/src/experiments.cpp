#include "stokesband/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "stokesband/errors.hpp"

namespace stokesband {

namespace {

// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written
// into per-index slots; assembly order is fixed by index, so reports are
// identical for any worker count.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int mode_code(ConstraintMode mode) {
    switch (mode) {
        case ConstraintMode::ZeroMean: return 0;
        case ConstraintMode::BoundaryZero: return 1;
        case ConstraintMode::BandZero: return 2;
        case ConstraintMode::PointZero: return 3;
    }
    return -1;
}

} // namespace

FittedRate fit_loglog_rate(const std::vector<std::pair<double, double>>& points,
                           const std::string& label,
                           std::optional<std::pair<double, double>> window) {
    std::vector<std::pair<double, double>> used;
    for (const auto& [x, y] : points) {
        if (window && (x < window->first || x > window->second)) continue;
        if (x <= 0.0 || y <= 0.0)
            throw invalid_data_error("log-log fit requires positive values");
        used.emplace_back(std::log10(x), std::log10(y));
    }
    if (used.size() < 3) throw invalid_data_error("log-log fit requires at least 3 points");

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [lx, ly] : used) {
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(used.size());
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) throw invalid_data_error("log-log fit is degenerate in x");
    FittedRate rate;
    rate.label = label;
    rate.slope = (n * sxy - sx * sy) / denom;
    rate.intercept = (sy - rate.slope * sx) / n;
    double ss = 0.0;
    for (const auto& [lx, ly] : used) {
        double r = ly - (rate.slope * lx + rate.intercept);
        ss += r * r;
    }
    rate.residual = std::sqrt(ss / n);
    rate.points = static_cast<int>(used.size());
    rate.reliable = rate.residual <= 0.1;
    return rate;
}

void ExperimentReport::add_row(std::vector<double> row, std::string row_status) {
    rows.push_back(std::move(row));
    status.push_back(std::move(row_status));
}

int ExperimentReport::column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw invalid_parameter_error("no report column named " + name);
    return static_cast<int>(it - columns.begin());
}

bool ExperimentReport::has_failures() const {
    return std::any_of(status.begin(), status.end(), [](const std::string& s) { return !s.empty(); });
}

void write_report(const ExperimentReport& report, ReportFormat format, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);

    if (format == ReportFormat::Csv) {
        for (size_t c = 0; c < report.columns.size(); ++c)
            f << report.columns[c] << (c + 1 < report.columns.size() ? "," : "");
        f << "\n";
        for (const auto& row : report.rows) {
            for (size_t c = 0; c < row.size(); ++c)
                f << format_double(row[c]) << (c + 1 < row.size() ? "," : "");
            f << "\n";
        }
        return;
    }

    nlohmann::json j;
    j["experiment"] = report.experiment;
    j["domain"] = report.domain;
    j["columns"] = report.columns;
    j["rows"] = report.rows;
    j["status"] = report.status;
    j["rates"] = nlohmann::json::array();
    for (const auto& r : report.rates) {
        j["rates"].push_back({{"label", r.label},
                              {"slope", r.slope},
                              {"intercept", r.intercept},
                              {"residual", r.residual},
                              {"points", r.points},
                              {"reliable", r.reliable}});
    }
    j["meta"] = report.meta;
    j["wall_seconds"] = report.wall_seconds;
    j["workers"] = report.workers;
    f << j.dump(2) << "\n";
}

ExperimentReport read_report_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open for reading: " + path);
    nlohmann::json j;
    f >> j;
    ExperimentReport report;
    report.experiment = j.at("experiment").get<std::string>();
    report.domain = j.at("domain").get<std::string>();
    report.columns = j.at("columns").get<std::vector<std::string>>();
    report.rows = j.at("rows").get<std::vector<std::vector<double>>>();
    report.status = j.at("status").get<std::vector<std::string>>();
    for (const auto& r : j.at("rates")) {
        FittedRate rate;
        rate.label = r.at("label").get<std::string>();
        rate.slope = r.at("slope").get<double>();
        rate.intercept = r.at("intercept").get<double>();
        rate.residual = r.at("residual").get<double>();
        rate.points = r.at("points").get<int>();
        rate.reliable = r.at("reliable").get<bool>();
        report.rates.push_back(rate);
    }
    report.meta = j.at("meta").get<std::map<std::string, double>>();
    report.wall_seconds = j.at("wall_seconds").get<double>();
    report.workers = j.at("workers").get<int>();
    return report;
}

double PerturbationSpec::operator()(double x, double y) const {
    return delta * std::cos(4.0 * M_PI * x * y) / normalizer;
}

PerturbationSpec make_coupling_perturbation(double delta, Vec2 sub_center, double sub_radius) {
    PerturbationSpec spec;
    spec.delta = delta;
    double maxabs = 0.0;
    const int n = 512;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double x = sub_center.x - sub_radius + 2.0 * sub_radius * i / (n - 1);
            double y = sub_center.y - sub_radius + 2.0 * sub_radius * j / (n - 1);
            double dx = x - sub_center.x, dy = y - sub_center.y;
            if (dx * dx + dy * dy > sub_radius * sub_radius) continue;
            maxabs = std::max(maxabs, std::abs(std::cos(4.0 * M_PI * x * y)));
        }
    }
    spec.normalizer = maxabs > 0.0 ? maxabs : 1.0;
    return spec;
}

// ---- C_Delta sweep ---------------------------------------------------------

namespace {

ScalarFunction cdelta_function(int id) {
    switch (id) {
        case 1: return [](double, double) { return 1e6; };
        case 2: return [](double, double) { return 1e-6; };
        case 3:
            return [](double x, double y) { return 7.0 * std::exp(-10.0 * (x * x + y * y)); };
        case 4:
            return [](double x, double y) {
                double d2 = (x - 0.2) * (x - 0.2) + (y - 0.2) * (y - 0.2);
                return std::pow(d2, 1.5);
            };
        case 5: return [](double x, double y) { return std::sin(2.0 * M_PI * x * y); };
        default: throw invalid_parameter_error("test function id must be 1..5");
    }
}

} // namespace

ExperimentReport run_cdelta_sweep(const CDeltaSweepConfig& config) {
    Stopwatch timer;
    ExperimentReport report;
    report.experiment = "cdelta_sweep";
    report.domain = config.domain;
    report.columns = {"h", "delta_volume", "ratio", "function_id"};
    report.workers = config.workers;

    std::vector<double> volumes = config.delta_volumes;
    if (volumes.empty())
        for (double e = -1.0; e >= -7.0; e -= 0.5) volumes.push_back(std::pow(10.0, e));
    for (size_t i = 1; i < volumes.size(); ++i)
        if (volumes[i] >= volumes[i - 1])
            throw invalid_parameter_error("Delta volumes must be strictly decreasing");

    const bool square = config.domain == "square";
    const Vec2 disk_center = square ? Vec2{0.5, 0.5} : Vec2{0.0, 0.0};

    struct Point {
        int fid = 0;
        double volume = 0.0;
        bool analytic = false;
    };
    std::vector<Point> grid;
    Mesh mesh;
    SparseMatrix Mp;
    if (config.discrete_path) {
        mesh = square ? generate_unit_square_mesh(config.square_n)
                      : generate_unit_disk_mesh(config.disk_radial, config.disk_angular);
        Mp = assemble_pressure_mass(mesh);
        // below this the selection degenerates to nothing at mesh resolution
        const double radius_floor =
            square ? 1.5 / config.square_n : 0.7 / config.disk_radial;
        for (int fid : config.functions)
            for (double v : volumes) {
                double radius = std::sqrt(v / M_PI);
                if (radius < radius_floor) continue;
                grid.push_back({fid, v, false});
            }
    }
    if (config.analytic_path && !square) {
        for (int fid : config.functions)
            for (double v : volumes) grid.push_back({fid, v, true});
    }

    std::vector<std::vector<double>> rows(grid.size());
    std::vector<std::string> statuses(grid.size());

    // discrete fields are shared read-only across workers
    std::map<int, DiscreteField> fields;
    if (config.discrete_path)
        for (int fid : config.functions) {
            DiscreteField f = interpolate_p1(mesh, cdelta_function(fid));
            if (fid == 5) f = apply_T(f, Mp);
            fields.emplace(fid, std::move(f));
        }

    parallel_for(static_cast<int>(grid.size()), config.workers, [&](int i) {
        const Point& pt = grid[i];
        try {
            if (pt.analytic) {
                double param;
                if (config.analytic_region == AnalyticRegion::CenterDisk)
                    param = std::sqrt(pt.volume / M_PI);
                else
                    param = 1.0 - std::sqrt(std::max(0.0, 1.0 - pt.volume / M_PI));
                auto res = analytic_cdelta_ratio(cdelta_function(pt.fid), config.analytic_region,
                                                 param, pt.fid <= 2, pt.fid == 5);
                rows[i] = {0.0, res.delta_volume, res.ratio, double(pt.fid)};
            } else {
                double radius = std::sqrt(pt.volume / M_PI);
                RegionMask mask = select_region(mesh, InteriorDisk{disk_center, radius}, true);
                auto est = c_delta_ratio(fields.at(pt.fid), mask);
                rows[i] = {mesh.h, est.delta_volume, est.value, double(pt.fid)};
            }
        } catch (const std::exception& e) {
            rows[i] = {pt.analytic ? 0.0 : mesh.h, pt.volume,
                       std::numeric_limits<double>::quiet_NaN(), double(pt.fid)};
            statuses[i] = e.what();
        }
    });
    for (size_t i = 0; i < grid.size(); ++i) report.add_row(rows[i], statuses[i]);

    // fitted decay rates per function and path
    for (int fid : config.functions) {
        for (bool analytic : {false, true}) {
            std::vector<std::pair<double, double>> pts;
            for (size_t i = 0; i < grid.size(); ++i) {
                if (grid[i].fid != fid || grid[i].analytic != analytic || !statuses[i].empty())
                    continue;
                pts.emplace_back(rows[i][1], rows[i][2]);
            }
            if (pts.size() < 3) continue;
            std::string label = "p" + std::to_string(fid) + (analytic ? "_analytic" : "_discrete");
            report.rates.push_back(fit_loglog_rate(pts, label));
            // extra fit over the smallest decade, where stagnation shows up
            double vmin = 1e300;
            for (auto& [x, y] : pts) vmin = std::min(vmin, x);
            std::vector<std::pair<double, double>> tail;
            for (auto& [x, y] : pts)
                if (x <= 10.0 * vmin) tail.emplace_back(x, y);
            if (tail.size() >= 3)
                report.rates.push_back(fit_loglog_rate(tail, label + "_tail"));
        }
    }
    if (config.discrete_path) report.meta["mesh_h"] = mesh.h;
    report.wall_seconds = timer.seconds();
    return report;
}

// ---- condition-number sweep -------------------------------------------------

ExperimentReport run_condition_sweep(const ConditionSweepConfig& config) {
    Stopwatch timer;
    ExperimentReport report;
    report.experiment = "condition_sweep";
    report.columns = {"h", "delta_volume", "diameter", "mode", "dimension", "condition"};
    report.workers = config.workers;

    auto zero_load = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };
    auto zero_vel = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };

    const bool square_axis = config.axis == SweepAxis::Mesh && config.mesh_domain == "square";
    report.domain = square_axis ? "square" : "disk";

    struct Point {
        int nr, na; // square n goes in nr with na = 0
        ConstraintMode mode;
        double radius = 0.0; // delta axis only
    };
    std::vector<Point> grid;
    if (config.axis == SweepAxis::Mesh) {
        if (square_axis) {
            for (int n : config.square_sizes)
                for (ConstraintMode mode : config.modes) grid.push_back({n, 0, mode, 0.0});
        } else {
            for (auto [nr, na] : config.disk_sizes)
                for (ConstraintMode mode : config.modes) grid.push_back({nr, na, mode, 0.0});
        }
    } else {
        for (double r : config.delta_radii)
            grid.push_back({config.disk_radial, config.disk_angular, ConstraintMode::BandZero, r});
        for (ConstraintMode mode : config.modes)
            if (mode != ConstraintMode::BandZero)
                grid.push_back({config.disk_radial, config.disk_angular, mode, 0.0});
    }

    std::vector<std::vector<double>> rows(grid.size());
    std::vector<std::string> statuses(grid.size());

    parallel_for(static_cast<int>(grid.size()), config.workers, [&](int i) {
        const Point& pt = grid[i];
        try {
            Mesh mesh = pt.na == 0 ? generate_unit_square_mesh(pt.nr)
                                   : generate_unit_disk_mesh(pt.nr, pt.na);
            StokesSystem sys = assemble_stokes(mesh, zero_load);
            VelocitySystem vd = apply_velocity_dirichlet(sys, zero_vel);

            PressureConstraint constraint = ZeroMean{};
            double dvol = 0.0, diam = 0.0;
            if (pt.mode == ConstraintMode::BoundaryZero) {
                constraint = BoundaryZero{};
            } else if (pt.mode == ConstraintMode::BandZero) {
                RegionMask mask;
                if (config.axis == SweepAxis::Mesh)
                    mask = config.band_fixed_width
                               ? select_region(mesh, BoundaryBand{0.25}, true)
                               : select_region(mesh, LayerBand{1}, true);
                else
                    mask = select_region(mesh, InteriorDisk{{1.0, 0.0}, pt.radius}, true);
                dvol = mask.volume;
                diam = mask.diameter_spec;
                constraint = BandZero{std::move(mask), nullptr};
            }
            ConstrainedSystem cs = apply_pressure_constraint(vd, constraint);
            const SparseMatrix& K = constrained_matrix(cs);
            ConditionMethod method =
                K.rows() <= config.dense_limit ? ConditionMethod::Dense : ConditionMethod::Iterative;
            double cond = condition_number(K, method);
            rows[i] = {mesh.h, dvol, diam, double(mode_code(pt.mode)), double(K.rows()), cond};
            if (std::isinf(cond)) statuses[i] = "infinite condition number";
        } catch (const std::exception& e) {
            rows[i] = {0.0, 0.0, 0.0, double(mode_code(pt.mode)), 0.0,
                       std::numeric_limits<double>::quiet_NaN()};
            statuses[i] = e.what();
        }
    });
    for (size_t i = 0; i < grid.size(); ++i) report.add_row(rows[i], statuses[i]);

    if (config.axis == SweepAxis::Mesh) {
        for (ConstraintMode mode : config.modes) {
            std::vector<std::pair<double, double>> pts;
            for (size_t i = 0; i < grid.size(); ++i)
                if (grid[i].mode == mode && statuses[i].empty() && std::isfinite(rows[i][5]))
                    pts.emplace_back(rows[i][0], rows[i][5]);
            if (pts.size() >= 3)
                report.rates.push_back(
                    fit_loglog_rate(pts, "cond_vs_h[" + to_string(mode) + "]"));
        }
    } else {
        std::vector<std::pair<double, double>> pts;
        for (size_t i = 0; i < grid.size(); ++i)
            if (grid[i].mode == ConstraintMode::BandZero && statuses[i].empty() &&
                std::isfinite(rows[i][5]) && rows[i][1] > 0.0)
                pts.emplace_back(rows[i][1], rows[i][5]);
        if (pts.size() >= 3)
            report.rates.push_back(fit_loglog_rate(pts, "cond_vs_delta[band_zero]"));
    }
    report.wall_seconds = timer.seconds();
    return report;
}

// ---- model coupling ----------------------------------------------------------

namespace {

constexpr Vec2 kSubCenter{0.5, 0.5};
constexpr double kSubRadius = 0.2;

// Heap-allocated so the internal mesh/system pointers stay valid when the
// owner is stored in a container.
struct GlobalSolve {
    Mesh mesh;
    StokesSystem sys;
    Solution sol;
    std::unique_ptr<FieldEvaluator> eval;
};

std::unique_ptr<GlobalSolve> solve_global(int n) {
    auto g = std::make_unique<GlobalSolve>();
    g->mesh = generate_unit_square_mesh(n);
    g->sys =
        assemble_stokes(g->mesh, [](double, double) { return std::array<double, 2>{0.0, -1.0}; });
    VelocitySystem vd = apply_velocity_dirichlet(
        g->sys, [](double, double) { return std::array<double, 2>{0.0, 0.0}; });
    g->sol = solve_stokes(apply_pressure_constraint(vd, ZeroMean{}));
    g->eval = std::make_unique<FieldEvaluator>(g->mesh, &g->sys.dofs);
    return g;
}

Mesh sub_disk_mesh(int global_n) {
    int nr = std::max(3, static_cast<int>(std::lround(kSubRadius * global_n)));
    int na = std::max(12, static_cast<int>(std::lround(2.0 * M_PI * kSubRadius * global_n)));
    Mesh unit = generate_unit_disk_mesh(nr, na);
    for (auto& v : unit.vertices) v = kSubCenter + kSubRadius * v;
    // rescale cached metrics
    Mesh scaled = unit;
    scaled.h = unit.h * 1.0; // vertices already scaled; h recomputed below
    double h = 0.0;
    for (int t = 0; t < scaled.triangle_count(); ++t) {
        const auto& tri = scaled.triangles[t];
        h = std::max({h, norm(scaled.vertices[tri[0]] - scaled.vertices[tri[1]]),
                      norm(scaled.vertices[tri[1]] - scaled.vertices[tri[2]]),
                      norm(scaled.vertices[tri[2]] - scaled.vertices[tri[0]])});
    }
    scaled.h = h;
    scaled.area_defect = M_PI * kSubRadius * kSubRadius - scaled.total_area();
    return scaled;
}

// band codes: -2 zero mean, -1 fixed physical band, 0 boundary (D=0), k>0 layer band
std::string band_label(int code) {
    if (code == -2) return "zero_mean";
    if (code == -1) return "fixed";
    if (code == 0) return "D0";
    return "L" + std::to_string(code);
}

} // namespace

ExperimentReport run_coupling_experiment(const CouplingConfig& config) {
    Stopwatch timer;
    ExperimentReport report;
    report.experiment = "coupling";
    report.domain = "square";
    report.columns = {"global_n", "h_sub",      "delta",  "band_code", "band_diameter",
                      "delta_volume", "u_h1_semi", "u_l2",   "p_l2",      "residual"};
    report.workers = config.workers;

    std::vector<int> band_codes;
    if (config.include_zero_mean) band_codes.push_back(-2);
    for (int k : config.band_layers) band_codes.push_back(k);
    if (config.include_fixed_band) band_codes.push_back(-1);

    struct Point {
        int n;
        double pert_delta;
        int band_code;
        double band_width; // delta axis only
    };
    std::vector<Point> grid;
    if (config.axis == SweepAxis::Mesh) {
        for (int n : config.mesh_sizes)
            for (double d : config.deltas)
                for (int code : band_codes) grid.push_back({n, d, code, 0.0});
    } else {
        for (double d : config.deltas) {
            for (double w : config.band_widths) grid.push_back({config.fixed_mesh_n, d, -1, w});
            if (config.include_zero_mean) grid.push_back({config.fixed_mesh_n, d, -2, 0.0});
            grid.push_back({config.fixed_mesh_n, d, 0, 0.0}); // D = 0 reference
        }
    }

    // global solves are shared; precompute them serially
    std::map<int, std::unique_ptr<GlobalSolve>> globals;
    {
        std::vector<int> sizes;
        for (const auto& pt : grid) sizes.push_back(pt.n);
        std::sort(sizes.begin(), sizes.end());
        sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
        for (int n : sizes) globals.emplace(n, solve_global(n));
    }

    std::vector<std::vector<double>> rows(grid.size());
    std::vector<std::string> statuses(grid.size());

    parallel_for(static_cast<int>(grid.size()), config.workers, [&](int i) {
        const Point& pt = grid[i];
        const GlobalSolve& g = *globals.at(pt.n);
        try {
            Mesh sub = sub_disk_mesh(pt.n);
            StokesSystem sys = assemble_stokes(
                sub, [](double, double) { return std::array<double, 2>{0.0, -1.0}; });
            sys.mesh = &sub;
            PerturbationSpec pert = make_coupling_perturbation(pt.pert_delta, kSubCenter, kSubRadius);

            VectorFunction vel_data = [&](double x, double y) {
                auto v = g.eval->velocity(g.sol.u, {x, y});
                if (pt.pert_delta != 0.0) {
                    double p = pert(x, y);
                    v[0] += p;
                    v[1] += p;
                }
                return v;
            };
            ScalarFunction pre_data = [&](double x, double y) {
                double p = g.eval->pressure(g.sol.p, {x, y});
                if (pt.pert_delta != 0.0) p += pert(x, y);
                return p;
            };

            VelocitySystem vd = apply_velocity_dirichlet(sys, vel_data);
            PressureConstraint constraint = ZeroMean{};
            double dvol = 0.0, diam = 0.0;
            if (pt.band_code == 0) {
                constraint = BoundaryZero{pre_data};
            } else if (pt.band_code > 0) {
                RegionMask mask = select_region(sub, LayerBand{pt.band_code}, true);
                dvol = mask.volume;
                diam = mask.diameter_spec;
                constraint = BandZero{std::move(mask), pre_data};
            } else if (pt.band_code == -1) {
                double w = config.axis == SweepAxis::Mesh ? config.fixed_band_width : pt.band_width;
                RegionMask mask = select_region(sub, BoundaryBand{w}, true);
                dvol = mask.volume;
                diam = mask.diameter_spec;
                constraint = BandZero{std::move(mask), pre_data};
            }
            Solution sol = solve_stokes(apply_pressure_constraint(vd, constraint));
            rows[i] = {double(pt.n),
                       sub.h,
                       pt.pert_delta,
                       double(pt.band_code),
                       diam,
                       dvol,
                       field_norm(sol.u, NormKind::H1Semi),
                       field_norm(sol.u, NormKind::L2),
                       field_norm(sol.p, NormKind::L2),
                       sol.diagnostics.residual};
        } catch (const std::exception& e) {
            rows[i] = {double(pt.n), 0.0, pt.pert_delta, double(pt.band_code), 0.0, 0.0,
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
            statuses[i] = e.what();
        }
    });
    for (size_t i = 0; i < grid.size(); ++i) report.add_row(rows[i], statuses[i]);

    // fitted growth rates
    if (config.axis == SweepAxis::Mesh) {
        for (double d : config.deltas)
            for (int code : band_codes) {
                std::vector<std::pair<double, double>> pv, pp;
                for (size_t i = 0; i < grid.size(); ++i) {
                    if (grid[i].pert_delta != d || grid[i].band_code != code ||
                        !statuses[i].empty())
                        continue;
                    pv.emplace_back(rows[i][1], rows[i][6]);
                    pp.emplace_back(rows[i][1], rows[i][8]);
                }
                if (pv.size() >= 3) {
                    std::string tag = "[delta=" + format_double(d) + "," + band_label(code) + "]";
                    report.rates.push_back(fit_loglog_rate(pv, "u_h1_vs_h" + tag));
                    report.rates.push_back(fit_loglog_rate(pp, "p_l2_vs_h" + tag));
                }
            }
    } else {
        for (double d : config.deltas) {
            std::vector<std::pair<double, double>> pv, pp;
            for (size_t i = 0; i < grid.size(); ++i) {
                if (grid[i].pert_delta != d || grid[i].band_code != -1 || !statuses[i].empty())
                    continue;
                pv.emplace_back(rows[i][5], rows[i][6]);
                pp.emplace_back(rows[i][5], rows[i][8]);
            }
            if (pv.size() >= 3) {
                std::string tag = "[delta=" + format_double(d) + "]";
                report.rates.push_back(fit_loglog_rate(pv, "u_h1_vs_delta" + tag));
                report.rates.push_back(fit_loglog_rate(pp, "p_l2_vs_delta" + tag));
            }
        }
    }

    // optional merged-solution export at the finest mesh
    if (!config.export_dir.empty() && config.axis == SweepAxis::Mesh) {
        int n = *std::max_element(config.mesh_sizes.begin(), config.mesh_sizes.end());
        const GlobalSolve& g = *globals.at(n);
        for (double d : config.deltas) {
            for (int code : band_codes) {
                if (code == -2) continue;
                try {
                    Mesh sub = sub_disk_mesh(n);
                    StokesSystem sys = assemble_stokes(
                        sub, [](double, double) { return std::array<double, 2>{0.0, -1.0}; });
                    sys.mesh = &sub;
                    PerturbationSpec pert = make_coupling_perturbation(d, kSubCenter, kSubRadius);
                    VectorFunction vel_data = [&](double x, double y) {
                        auto v = g.eval->velocity(g.sol.u, {x, y});
                        double p = d != 0.0 ? pert(x, y) : 0.0;
                        return std::array<double, 2>{v[0] + p, v[1] + p};
                    };
                    ScalarFunction pre_data = [&](double x, double y) {
                        return g.eval->pressure(g.sol.p, {x, y}) + (d != 0.0 ? pert(x, y) : 0.0);
                    };
                    VelocitySystem vd = apply_velocity_dirichlet(sys, vel_data);
                    PressureConstraint constraint;
                    if (code == 0)
                        constraint = BoundaryZero{pre_data};
                    else if (code > 0)
                        constraint = BandZero{select_region(sub, LayerBand{code}, true), pre_data};
                    else
                        constraint = BandZero{
                            select_region(sub, BoundaryBand{config.fixed_band_width}, true),
                            pre_data};
                    Solution sol = solve_stokes(apply_pressure_constraint(vd, constraint));
                    FieldEvaluator sub_eval(sub, &sys.dofs);

                    // sampled merged fields plus the relative u2 error against
                    // the perturbed outer field (which the subproblem couples to;
                    // the error is then identically zero outside the subdomain)
                    const int m = config.export_samples;
                    auto outer = [&](Vec2 x) {
                        auto u = g.eval->velocity(g.sol.u, x);
                        double pd = d != 0.0 ? pert(x.x, x.y) : 0.0;
                        return std::array<double, 3>{u[0] + pd, u[1] + pd,
                                                     g.eval->pressure(g.sol.p, x) + pd};
                    };
                    double u2max = 0.0;
                    for (int sy = 0; sy < m; ++sy)
                        for (int sx = 0; sx < m; ++sx) {
                            Vec2 x{(sx + 0.5) / m, (sy + 0.5) / m};
                            u2max = std::max(u2max, std::abs(outer(x)[1]));
                        }
                    std::string tag = "delta" + format_double(d) + "_" + band_label(code);
                    std::ofstream f(config.export_dir + "/merged_" + tag + ".csv");
                    if (!f) throw io_error("cannot write merged export");
                    f.precision(17);
                    f << "x,y,u1,u2,p,e\n";
                    for (int sy = 0; sy < m; ++sy)
                        for (int sx = 0; sx < m; ++sx) {
                            Vec2 x{(sx + 0.5) / m, (sy + 0.5) / m};
                            double r = norm(x - kSubCenter);
                            auto ref = outer(x);
                            std::array<double, 2> u = {ref[0], ref[1]};
                            double p = ref[2];
                            if (r <= kSubRadius && sub_eval.locate(x) >= 0) {
                                u = sub_eval.velocity(sol.u, x);
                                p = sub_eval.pressure(sol.p, x);
                            }
                            double e = u2max > 0.0 ? std::abs(u[1] - ref[1]) / u2max : 0.0;
                            f << x.x << "," << x.y << "," << u[0] << "," << u[1] << "," << p << ","
                              << e << "\n";
                        }
                } catch (const std::exception&) {
                    // export failures do not invalidate the sweep itself
                }
            }
        }
    }

    report.meta["sub_radius"] = kSubRadius;
    report.wall_seconds = timer.seconds();
    return report;
}

// ---- divergence sweep ---------------------------------------------------------

ExperimentReport run_divergence_sweep(const DivergenceSweepConfig& config) {
    Stopwatch timer;
    ExperimentReport report;
    report.experiment = "divergence_sweep";
    report.domain = "square";
    report.columns = {"delta",   "band_width",    "delta_volume", "l1",   "l2",
                      "l2_mask", "l2_complement", "abs_integral", "orth", "l1_ref",
                      "l1_gap",  "u_h1"};
    report.workers = config.workers;

    Mesh mesh = generate_unit_square_mesh(config.mesh_n);
    auto load = [](double, double) { return std::array<double, 2>{0.0, -1.0}; };
    auto vel_bc = [](double x, double y) {
        double s = std::sin(2.0 * M_PI * x * y);
        return std::array<double, 2>{x * s, s};
    };
    StokesSystem sys = assemble_stokes(mesh, load);
    VelocitySystem vd = apply_velocity_dirichlet(sys, vel_bc);
    Solution ref = solve_stokes(apply_pressure_constraint(vd, ZeroMean{}));
    FieldEvaluator eval(mesh, &sys.dofs);

    // max_i |(B u)_i + m_i lambda| over free pressure rows
    auto orthogonality = [&](const Solution& sol, const ConstrainedSystem& cs) {
        auto bu = sys.B.multiply(sol.u.coeffs);
        std::vector<double> msum;
        if (cs.has_multiplier) {
            msum.assign(sys.n_pressure_dofs(), 0.0);
            auto rp = sys.Mp.row_offsets();
            auto vm = sys.Mp.values();
            for (int r = 0; r < sys.n_pressure_dofs(); ++r)
                for (int k = rp[r]; k < rp[r + 1]; ++k) msum[r] += vm[k];
        }
        double m = 0.0;
        for (int idx : cs.free_pressure) {
            double v = bu[idx];
            if (cs.has_multiplier) v += msum[idx] * sol.diagnostics.multiplier;
            m = std::max(m, std::abs(v));
        }
        return m;
    };

    RegionMask ref_mask = select_region(mesh, BoundaryBand{config.band_widths.front()}, true);
    DivergenceMetrics ref_metrics = divergence_metrics(mesh, ref.u, ref_mask);
    const double ref_u_h1 = field_norm(ref.u, NormKind::H1Semi);
    {
        ConstrainedSystem cs0 = apply_pressure_constraint(vd, ZeroMean{});
        report.add_row({0.0, 0.0, 0.0, ref_metrics.l1_omega, ref_metrics.l2_omega,
                        ref_metrics.l2_mask, ref_metrics.l2_complement, ref_metrics.abs_integral,
                        orthogonality(ref, cs0), ref_metrics.l1_omega, 0.0, ref_u_h1});
    }

    struct Point {
        double delta, width;
    };
    std::vector<Point> grid;
    for (double d : config.deltas)
        for (double w : config.band_widths) grid.push_back({d, w});
    std::vector<std::vector<double>> rows(grid.size());
    std::vector<std::string> statuses(grid.size());

    parallel_for(static_cast<int>(grid.size()), config.workers, [&](int i) {
        const auto [delta, width] = grid[i];
        try {
            RegionMask mask = select_region(mesh, BoundaryBand{width}, true);
            ScalarFunction band_data = [&, delta](double x, double y) {
                double v = eval.pressure(ref.p, {x, y});
                if (delta != 0.0) v += delta * std::cos(2.0 * M_PI * x * y);
                return v;
            };
            ConstrainedSystem cs = apply_pressure_constraint(vd, BandZero{mask, band_data});
            Solution sol = solve_stokes(cs);
            DivergenceMetrics m = divergence_metrics(mesh, sol.u, mask);
            rows[i] = {delta,
                       width,
                       mask.volume,
                       m.l1_omega,
                       m.l2_omega,
                       m.l2_mask,
                       m.l2_complement,
                       m.abs_integral,
                       orthogonality(sol, cs),
                       ref_metrics.l1_omega,
                       std::abs(m.l1_omega - ref_metrics.l1_omega),
                       field_norm(sol.u, NormKind::H1Semi)};
        } catch (const std::exception& e) {
            rows[i].assign(report.columns.size(), std::numeric_limits<double>::quiet_NaN());
            rows[i][0] = delta;
            rows[i][1] = width;
            statuses[i] = e.what();
        }
    });
    for (size_t i = 0; i < grid.size(); ++i) report.add_row(rows[i], statuses[i]);

    for (double d : config.deltas) {
        std::vector<std::pair<double, double>> pts;
        for (size_t i = 0; i < grid.size(); ++i)
            if (grid[i].delta == d && statuses[i].empty() && rows[i][10] > 0.0)
                pts.emplace_back(rows[i][2], rows[i][10]);
        if (pts.size() >= 3)
            report.rates.push_back(
                fit_loglog_rate(pts, "l1_gap_vs_delta[delta=" + format_double(d) + "]"));
    }
    report.meta["mesh_h"] = mesh.h;
    report.wall_seconds = timer.seconds();
    return report;
}

// ---- inf-sup study --------------------------------------------------------------

ExperimentReport run_infsup_study(const InfSupConfig& config) {
    Stopwatch timer;
    ExperimentReport report;
    report.experiment = "infsup_study";
    report.domain = "square+disk";
    report.columns = {"domain_code", "n", "h", "mode", "delta_volume", "diameter", "beta"};
    report.workers = config.workers;

    auto zero_load = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };

    struct Point {
        int domain_code; // 0 square, 1 disk
        int n;           // square n or disk radial count
        ConstraintMode mode;
        double width = 0.0;  // fixed band width (square)
        double radius = 0.0; // central Delta radius (disk)
    };
    std::vector<Point> grid;
    for (int n : config.square_sizes) grid.push_back({0, n, ConstraintMode::ZeroMean, 0.0, 0.0});
    for (int n : config.band_sizes)
        grid.push_back({0, n, ConstraintMode::BandZero, config.fixed_band_width, 0.0});
    for (double r : config.disk_radii)
        grid.push_back({1, config.disk_radial, ConstraintMode::BandZero, 0.0, r});

    std::vector<std::vector<double>> rows(grid.size());
    std::vector<std::string> statuses(grid.size());

    parallel_for(static_cast<int>(grid.size()), config.workers, [&](int i) {
        const Point& pt = grid[i];
        try {
            Mesh mesh = pt.domain_code == 0
                            ? generate_unit_square_mesh(pt.n)
                            : generate_unit_disk_mesh(config.disk_radial, config.disk_angular);
            StokesSystem sys = assemble_stokes(mesh, zero_load);
            PressureConstraint constraint = ZeroMean{};
            double dvol = 0.0, diam = 0.0;
            if (pt.mode == ConstraintMode::BandZero) {
                RegionMask mask =
                    pt.domain_code == 0
                        ? select_region(mesh, BoundaryBand{pt.width}, true)
                        : select_region(mesh, InteriorDisk{{0.0, 0.0}, pt.radius}, true);
                dvol = mask.volume;
                diam = mask.diameter_spec;
                constraint = BandZero{std::move(mask), nullptr};
            }
            ConstantEstimate est = discrete_infsup(sys, constraint);
            rows[i] = {double(pt.domain_code), double(pt.n), mesh.h,
                       double(mode_code(pt.mode)), dvol, diam, est.value};
        } catch (const std::exception& e) {
            rows[i].assign(report.columns.size(), std::numeric_limits<double>::quiet_NaN());
            rows[i][0] = double(pt.domain_code);
            rows[i][1] = double(pt.n);
            statuses[i] = e.what();
        }
    });
    for (size_t i = 0; i < grid.size(); ++i) report.add_row(rows[i], statuses[i]);

    // beta decay vs |Delta| on the disk
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < grid.size(); ++i)
        if (grid[i].domain_code == 1 && statuses[i].empty() && rows[i][4] > 0.0)
            pts.emplace_back(rows[i][4], rows[i][6]);
    if (pts.size() >= 3) report.rates.push_back(fit_loglog_rate(pts, "beta_vs_delta[disk]"));

    // zero-mean mesh stability across the square sizes
    std::vector<double> zm;
    for (size_t i = 0; i < grid.size(); ++i)
        if (grid[i].domain_code == 0 && grid[i].mode == ConstraintMode::ZeroMean &&
            statuses[i].empty())
            zm.push_back(rows[i][6]);
    if (zm.size() >= 2) {
        double lo = *std::min_element(zm.begin(), zm.end());
        double hi = *std::max_element(zm.begin(), zm.end());
        report.meta["zero_mean_beta_variation"] = (hi - lo) / lo;
    }
    report.wall_seconds = timer.seconds();
    return report;
}

// ---- manufactured convergence ---------------------------------------------------

namespace manufactured {

std::array<double, 2> velocity(double x, double y) {
    double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
    return {M_PI * sx * sx * std::sin(2.0 * M_PI * y), -M_PI * std::sin(2.0 * M_PI * x) * sy * sy};
}

std::array<double, 2> grad_u1(double x, double y) {
    double sx = std::sin(M_PI * x);
    return {M_PI * M_PI * std::sin(2.0 * M_PI * x) * std::sin(2.0 * M_PI * y),
            2.0 * M_PI * M_PI * sx * sx * std::cos(2.0 * M_PI * y)};
}

std::array<double, 2> grad_u2(double x, double y) {
    double sy = std::sin(M_PI * y);
    return {-2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * x) * sy * sy,
            -M_PI * M_PI * std::sin(2.0 * M_PI * x) * std::sin(2.0 * M_PI * y)};
}

double pressure(double x, double y) { return std::sin(M_PI * x) * std::cos(M_PI * y); }

std::array<double, 2> forcing(double x, double y) {
    double pi3 = M_PI * M_PI * M_PI;
    double sx = std::sin(M_PI * x), sy = std::sin(M_PI * y);
    double s2x = std::sin(2.0 * M_PI * x), s2y = std::sin(2.0 * M_PI * y);
    double c2x = std::cos(2.0 * M_PI * x), c2y = std::cos(2.0 * M_PI * y);
    double f1 = -2.0 * pi3 * c2x * s2y + 4.0 * pi3 * sx * sx * s2y +
                M_PI * std::cos(M_PI * x) * std::cos(M_PI * y);
    double f2 = -4.0 * pi3 * s2x * sy * sy + 2.0 * pi3 * s2x * c2y - M_PI * sx * sy;
    return {f1, f2};
}

} // namespace manufactured

ExperimentReport run_manufactured_convergence(const ConvergenceConfig& config) {
    Stopwatch timer;
    ExperimentReport report;
    report.experiment = "manufactured_convergence";
    report.domain = "square";
    report.columns = {"n",         "h",           "vel_h1_err", "vel_l2_err",
                      "pre_l2_err", "p_mean_abs", "band_vel_diff", "residual"};
    report.workers = config.workers;

    std::vector<std::vector<double>> rows(config.mesh_sizes.size());
    std::vector<std::string> statuses(config.mesh_sizes.size());

    parallel_for(static_cast<int>(config.mesh_sizes.size()), config.workers, [&](int i) {
        int n = config.mesh_sizes[i];
        try {
            Mesh mesh = generate_unit_square_mesh(n);
            StokesSystem sys = assemble_stokes(mesh, [](double x, double y) {
                return manufactured::forcing(x, y);
            });
            sys.mesh = &mesh;
            VelocitySystem vd = apply_velocity_dirichlet(sys, [](double x, double y) {
                return manufactured::velocity(x, y);
            });
            Solution sol = solve_stokes(apply_pressure_constraint(vd, ZeroMean{}));

            double vel_h1 = velocity_error_h1semi(
                sol.u, [](double x, double y) { return manufactured::grad_u1(x, y); },
                [](double x, double y) { return manufactured::grad_u2(x, y); });
            double vel_l2 = velocity_error_l2(
                sol.u, [](double x, double y) { return manufactured::velocity(x, y); });
            double pre_l2 = pressure_error_l2(
                sol.p, [](double x, double y) { return manufactured::pressure(x, y); });

            auto mp_p = sys.Mp.multiply(sol.p.coeffs);
            double p_mean = 0.0;
            for (double v : mp_p) p_mean += v;

            double band_diff = 0.0;
            if (config.with_band_variant) {
                RegionMask mask = select_region(mesh, LayerBand{2}, true);
                // band data = trace of the zero-mean discrete pressure; the
                // data function is queried at exact vertex coordinates
                std::map<std::pair<double, double>, double> vertex_value;
                for (int v = 0; v < mesh.vertex_count(); ++v)
                    vertex_value[{mesh.vertices[v].x, mesh.vertices[v].y}] = sol.p.coeffs[v];
                ScalarFunction trace = [vertex_value](double x, double y) {
                    return vertex_value.at({x, y});
                };
                Solution band = solve_stokes(
                    apply_pressure_constraint(vd, BandZero{std::move(mask), trace}));
                DiscreteField diff = band.u;
                for (size_t k = 0; k < diff.coeffs.size(); ++k) diff.coeffs[k] -= sol.u.coeffs[k];
                band_diff = field_norm(diff, NormKind::H1Semi);
            }
            rows[i] = {double(n),  mesh.h, vel_h1,   vel_l2,
                       pre_l2,     std::abs(p_mean), band_diff, sol.diagnostics.residual};
        } catch (const std::exception& e) {
            rows[i].assign(report.columns.size(), std::numeric_limits<double>::quiet_NaN());
            rows[i][0] = double(n);
            statuses[i] = e.what();
        }
    });
    for (size_t i = 0; i < rows.size(); ++i) report.add_row(rows[i], statuses[i]);

    std::vector<std::pair<double, double>> ph1, pl2;
    for (size_t i = 0; i < rows.size(); ++i)
        if (statuses[i].empty()) {
            ph1.emplace_back(rows[i][1], rows[i][2]);
            pl2.emplace_back(rows[i][1], rows[i][4]);
        }
    if (ph1.size() >= 3) {
        report.rates.push_back(fit_loglog_rate(ph1, "vel_h1_err_vs_h"));
        report.rates.push_back(fit_loglog_rate(pl2, "pre_l2_err_vs_h"));
    }
    report.wall_seconds = timer.seconds();
    return report;
}

} // namespace stokesband

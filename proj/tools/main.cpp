#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stokesband/config.hpp"
#include "stokesband/errors.hpp"
#include "stokesband/experiments.hpp"
#include "stokesband/fem.hpp"
#include "stokesband/mesh.hpp"
#include "stokesband/operators.hpp"
#include "stokesband/solver.hpp"

namespace sb = stokesband;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    int workers = 1;
    bool strict = false;
    bool strict_guidelines = false;
};

std::string default_out_dir() {
    if (const char* env = std::getenv("STOKESBAND_OUT")) return env;
    return ".";
}

sb::Config load_config(const CommonOptions& opts) {
    if (opts.config_path.empty()) return {};
    return sb::Config::load(opts.config_path);
}

void write_manifest(const CommonOptions& opts, const sb::Config& cfg, const std::string& name,
                    double wall_seconds) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["subcommand"] = name;
    j["wall_seconds"] = wall_seconds;
    j["workers"] = opts.workers;
    j["config"] = cfg.serialize();
    std::ofstream f(opts.out_dir + "/" + name + "_manifest.json");
    if (!f) throw sb::io_error("cannot write manifest in " + opts.out_dir);
    f << j.dump(2) << "\n";
}

// advisory by default, fatal under --strict-guidelines
bool guideline_warning(const CommonOptions& opts, const std::string& message) {
    std::cerr << "warning: " << message << "\n";
    return opts.strict_guidelines;
}

sb::Mesh make_mesh(const sb::Config& cfg) {
    std::string domain = cfg.get_string("mesh", "domain", "square");
    if (domain == "square") return sb::generate_unit_square_mesh(cfg.get_int("mesh", "n", 16));
    if (domain == "disk")
        return sb::generate_unit_disk_mesh(cfg.get_int("mesh", "radial", 12),
                                           cfg.get_int("mesh", "angular", 48));
    throw sb::invalid_parameter_error("unknown domain: " + domain);
}

sb::RegionSpec make_region_spec(const sb::Config& cfg) {
    std::string kind = cfg.get_string("region", "kind", "layer_band");
    if (kind == "empty") return sb::EmptyRegion{};
    if (kind == "boundary_band") return sb::BoundaryBand{cfg.get_double("region", "width", 0.1)};
    if (kind == "interior_disk")
        return sb::InteriorDisk{{cfg.get_double("region", "cx", 0.0),
                                 cfg.get_double("region", "cy", 0.0)},
                                cfg.get_double("region", "radius", 0.1)};
    if (kind == "layer_band") return sb::LayerBand{cfg.get_int("region", "layers", 1)};
    throw sb::invalid_parameter_error("unknown region kind: " + kind);
}

int finish_report(const sb::ExperimentReport& report, const CommonOptions& opts,
                  const sb::Config& cfg, const std::string& name) {
    sb::write_report(report, sb::ReportFormat::Csv, opts.out_dir + "/" + name + ".csv");
    sb::write_report(report, sb::ReportFormat::Json, opts.out_dir + "/" + name + ".json");
    write_manifest(opts, cfg, name, report.wall_seconds);
    for (size_t i = 0; i < report.status.size(); ++i)
        if (!report.status[i].empty())
            std::cerr << name << " row " << i << " failed: " << report.status[i] << "\n";
    if (opts.strict && report.has_failures()) return 2;
    return 0;
}

int cmd_mesh(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    auto t0 = std::chrono::steady_clock::now();
    sb::Mesh mesh = make_mesh(cfg);
    std::string path = opts.out_dir + "/" +
                       cfg.get_string("mesh", "file", "mesh.txt");
    sb::write_mesh_file(mesh, path);
    std::cout << "mesh: " << mesh.vertex_count() << " vertices, " << mesh.triangle_count()
              << " triangles, h = " << mesh.h << ", area = " << mesh.total_area() << "\n";
    if (cfg.has("region", "kind")) {
        sb::RegionMask mask = sb::select_region(mesh, make_region_spec(cfg));
        std::cout << "region: " << mask.triangle_set.size() << " triangles, |Delta| = "
                  << mask.volume << ", D(Delta) = " << mask.diameter_spec << "\n";
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(opts, cfg, "mesh", wall);
    return 0;
}

int cmd_solve(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    auto t0 = std::chrono::steady_clock::now();
    sb::Mesh mesh = make_mesh(cfg);

    double fx = cfg.get_double("load", "fx", 0.0);
    double fy = cfg.get_double("load", "fy", -1.0);
    sb::StokesSystem sys = sb::assemble_stokes(
        mesh, [fx, fy](double, double) { return std::array<double, 2>{fx, fy}; });
    sb::VelocitySystem vd = sb::apply_velocity_dirichlet(
        sys, [](double, double) { return std::array<double, 2>{0.0, 0.0}; });

    std::string mode = cfg.get_string("constraint", "mode", "zero_mean");
    sb::PressureConstraint constraint = sb::ZeroMean{};
    if (mode == "band_zero") {
        constraint = sb::BandZero{sb::select_region(mesh, make_region_spec(cfg), true), nullptr};
    } else if (mode == "boundary_zero") {
        if (guideline_warning(opts,
                              "pressure fixed only on the boundary ring: the stability constant "
                              "degrades as the band shrinks; a band of fixed positive area is "
                              "recommended"))
            return 1;
        constraint = sb::BoundaryZero{};
    } else if (mode == "point_zero") {
        if (guideline_warning(opts,
                              "pinning the pressure in a single point is not recommended; prefer "
                              "a band of positive area independent of the mesh size"))
            return 1;
        constraint = sb::PointZero{cfg.get_int("constraint", "vertex", 0),
                                   cfg.get_double("constraint", "value", 0.0)};
    } else if (mode != "zero_mean") {
        throw sb::invalid_parameter_error("unknown constraint mode: " + mode);
    }

    sb::Solution sol = sb::solve_stokes(sb::apply_pressure_constraint(vd, constraint));
    sb::write_field_csv(sol.u, &sys.dofs, opts.out_dir + "/velocity.csv");
    sb::write_field_csv(sol.p, nullptr, opts.out_dir + "/pressure.csv");
    sb::write_solution_summary(sol, opts.out_dir + "/solve_summary.json");
    std::cout << "solved " << sol.diagnostics.dimension
              << " unknowns, residual = " << sol.diagnostics.residual << "\n";
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(opts, cfg, "solve", wall);
    return 0;
}

int cmd_cdelta(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    sb::CDeltaSweepConfig c;
    c.domain = cfg.get_string("cdelta", "domain", c.domain);
    c.functions = cfg.get_int_list("cdelta", "functions", c.functions);
    c.delta_volumes = cfg.get_double_list("cdelta", "volumes", c.delta_volumes);
    c.discrete_path = cfg.get_bool("cdelta", "discrete", c.discrete_path);
    c.analytic_path = cfg.get_bool("cdelta", "analytic", c.analytic_path);
    c.disk_radial = cfg.get_int("cdelta", "radial", c.disk_radial);
    c.disk_angular = cfg.get_int("cdelta", "angular", c.disk_angular);
    c.square_n = cfg.get_int("cdelta", "n", c.square_n);
    if (cfg.get_string("cdelta", "region", "center_disk") == "boundary_ring")
        c.analytic_region = sb::AnalyticRegion::BoundaryRing;
    c.workers = opts.workers;
    return finish_report(sb::run_cdelta_sweep(c), opts, cfg, "cdelta");
}

int cmd_cond(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    sb::ConditionSweepConfig c;
    c.axis = cfg.get_string("cond", "axis", "mesh") == "delta" ? sb::SweepAxis::Delta
                                                               : sb::SweepAxis::Mesh;
    c.mesh_domain = cfg.get_string("cond", "domain", c.mesh_domain);
    c.band_fixed_width = cfg.get_bool("cond", "fixed_width_band", c.band_fixed_width);
    c.square_sizes = cfg.get_int_list("cond", "square_sizes", c.square_sizes);
    c.disk_radial = cfg.get_int("cond", "radial", c.disk_radial);
    c.disk_angular = cfg.get_int("cond", "angular", c.disk_angular);
    c.delta_radii = cfg.get_double_list("cond", "radii", c.delta_radii);
    if (cfg.has("cond", "disk_sizes")) {
        c.disk_sizes.clear();
        for (int nr : cfg.get_int_list("cond", "disk_sizes", {}))
            c.disk_sizes.emplace_back(nr, 4 * nr);
    }
    c.workers = opts.workers;
    return finish_report(sb::run_condition_sweep(c), opts, cfg, "cond");
}

int cmd_couple(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    sb::CouplingConfig c;
    c.axis = cfg.get_string("couple", "axis", "mesh") == "delta" ? sb::SweepAxis::Delta
                                                                 : sb::SweepAxis::Mesh;
    c.deltas = cfg.get_double_list("couple", "deltas", c.deltas);
    c.mesh_sizes = cfg.get_int_list("couple", "mesh_sizes", c.mesh_sizes);
    c.band_layers = cfg.get_int_list("couple", "layers", c.band_layers);
    c.fixed_band_width = cfg.get_double("couple", "fixed_width", c.fixed_band_width);
    c.fixed_mesh_n = cfg.get_int("couple", "fixed_mesh_n", c.fixed_mesh_n);
    c.band_widths = cfg.get_double_list("couple", "widths", c.band_widths);
    if (cfg.get_bool("couple", "export", false)) c.export_dir = opts.out_dir;
    c.workers = opts.workers;
    bool scales_with_mesh = false;
    for (int k : c.band_layers) scales_with_mesh |= (k > 0);
    if (scales_with_mesh &&
        guideline_warning(opts,
                          "band diameter proportional to the mesh size: the band volume "
                          "vanishes under refinement and the pressure estimate degrades; a "
                          "mesh-independent band width is recommended"))
        return 1;
    return finish_report(sb::run_coupling_experiment(c), opts, cfg, "couple");
}

int cmd_divergence(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    sb::DivergenceSweepConfig c;
    c.deltas = cfg.get_double_list("divergence", "deltas", c.deltas);
    c.mesh_n = cfg.get_int("divergence", "n", c.mesh_n);
    c.band_widths = cfg.get_double_list("divergence", "widths", c.band_widths);
    c.workers = opts.workers;
    return finish_report(sb::run_divergence_sweep(c), opts, cfg, "divergence");
}

int cmd_infsup(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    sb::InfSupConfig c;
    c.square_sizes = cfg.get_int_list("infsup", "square_sizes", c.square_sizes);
    c.band_sizes = cfg.get_int_list("infsup", "band_sizes", c.band_sizes);
    c.fixed_band_width = cfg.get_double("infsup", "band_width", c.fixed_band_width);
    c.disk_radial = cfg.get_int("infsup", "radial", c.disk_radial);
    c.disk_angular = cfg.get_int("infsup", "angular", c.disk_angular);
    c.disk_radii = cfg.get_double_list("infsup", "radii", c.disk_radii);
    c.workers = opts.workers;
    return finish_report(sb::run_infsup_study(c), opts, cfg, "infsup");
}

int cmd_convergence(const CommonOptions& opts) {
    sb::Config cfg = load_config(opts);
    sb::ConvergenceConfig c;
    c.mesh_sizes = cfg.get_int_list("convergence", "sizes", c.mesh_sizes);
    c.with_band_variant = cfg.get_bool("convergence", "band_variant", c.with_band_variant);
    c.workers = opts.workers;
    return finish_report(sb::run_manufactured_convergence(c), opts, cfg, "convergence");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stokes solver with band-type pressure Dirichlet constraints"};
    app.require_subcommand(1);

    CommonOptions opts;
    opts.out_dir = default_out_dir();
    app.add_option("--config", opts.config_path, "sectioned key-value config file");
    app.add_option("--out", opts.out_dir, "output directory (default $STOKESBAND_OUT or .)");
    app.add_option("--workers", opts.workers, "worker threads for sweep grids");
    app.add_flag("--strict", opts.strict, "nonzero exit on any failed grid point");
    app.add_flag("--strict-guidelines", opts.strict_guidelines,
                 "treat guideline warnings as errors");

    app.add_subcommand("mesh", "generate a mesh file and optional region summary")->fallthrough();
    app.add_subcommand("solve", "solve one Stokes problem")->fallthrough();
    app.add_subcommand("cdelta", "lower-bound constant sweep vs |Delta|")->fallthrough();
    app.add_subcommand("cond", "condition numbers under mesh or |Delta| refinement")->fallthrough();
    app.add_subcommand("couple", "model-coupling study on a subdomain disk")->fallthrough();
    app.add_subcommand("divergence", "velocity divergence norms vs |Delta|")->fallthrough();
    app.add_subcommand("infsup", "discrete inf-sup constants")->fallthrough();
    app.add_subcommand("convergence", "manufactured-solution convergence orders")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        std::filesystem::create_directories(opts.out_dir);
        std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "mesh") return cmd_mesh(opts);
        if (sub == "solve") return cmd_solve(opts);
        if (sub == "cdelta") return cmd_cdelta(opts);
        if (sub == "cond") return cmd_cond(opts);
        if (sub == "couple") return cmd_couple(opts);
        if (sub == "divergence") return cmd_divergence(opts);
        if (sub == "infsup") return cmd_infsup(opts);
        if (sub == "convergence") return cmd_convergence(opts);
        std::cerr << "unknown subcommand: " << sub << "\n";
        return 1;
    } catch (const sb::invalid_parameter_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sb::invalid_data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sb::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

// Command-line driver: synthesize / calibrate / localize / evaluate / peb /
// pipeline over a JSON scenario config. Errors are reported as JSON on
// stderr with a nonzero exit code.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "mi/io.hpp"
#include "mi/pipeline.hpp"
#include "mi/scenario.hpp"
#include "mi/stats.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::string calibration = "full";
    std::string measurements_path;
    std::string calibration_file;
};

mi::harness::Scenario load_scenario(const CommonOptions& opts) {
    mi::harness::Scenario sc = opts.config_path.empty()
                                   ? mi::harness::default_scenario()
                                   : mi::harness::scenario_from_json_file(opts.config_path);
    if (opts.seed)
        sc.seed = *opts.seed;
    return sc;
}

std::string out_path(const CommonOptions& opts, const std::string& name) {
    fs::create_directories(opts.out_dir);
    return (fs::path(opts.out_dir) / name).string();
}

std::vector<mi::calib::Deployment> load_or_synthesize(const mi::harness::Scenario& sc,
                                                      const CommonOptions& opts) {
    if (!opts.measurements_path.empty())
        return mi::harness::read_measurements_csv(opts.measurements_path);
    return mi::harness::synthesize_measurements(sc);
}

int cmd_synthesize(const CommonOptions& opts, bool dump_coils) {
    const auto sc = load_scenario(opts);
    const auto deps = mi::harness::synthesize_measurements(sc);
    mi::harness::write_measurements_csv(deps, out_path(opts, "measurements.csv"));
    if (dump_coils) {
        const auto sims = sc.sim_anchors();
        for (std::size_t i = 0; i < sims.size(); ++i) {
            std::ostringstream name;
            name << "anchor" << (i + 1) << "_coil.csv";
            mi::emsim::write_wirepath_csv_file(
                mi::emsim::build_spiderweb(sims[i].spec, sims[i].pose),
                out_path(opts, name.str()));
        }
    }
    std::cout << "wrote " << deps.size() << " deployments to " << opts.out_dir << "\n";
    return 0;
}

int cmd_calibrate(const CommonOptions& opts) {
    const auto sc = load_scenario(opts);
    const auto deps = load_or_synthesize(sc, opts);
    const auto mode = mi::harness::calibration_mode_from_string(opts.calibration);
    const auto run = mi::harness::run_calibration(sc, deps, mode);
    mi::harness::write_calibration_json(run.anchors, out_path(opts, "calibration.json"));
    mi::harness::write_model_error_csv(run.evaluation_error, out_path(opts, "model_error.csv"));
    json summary;
    summary["relative_model_error"] = {{"median", run.evaluation_error.median},
                                       {"p90", run.evaluation_error.percentile90},
                                       {"excluded_links", run.evaluation_error.excluded}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_localize(const CommonOptions& opts) {
    const auto sc = load_scenario(opts);
    const auto deps = load_or_synthesize(sc, opts);
    auto anchors = sc.anchors;
    if (!opts.calibration_file.empty()) {
        anchors = mi::harness::read_calibration_json(anchors, opts.calibration_file);
    } else {
        const auto mode = mi::harness::calibration_mode_from_string(opts.calibration);
        anchors = mi::harness::run_calibration(sc, deps, mode).anchors;
    }
    const auto split = mi::calib::split_odd_even(deps);
    const auto rows = mi::harness::localize_batch(sc, anchors, split.evaluation);
    mi::harness::write_results_csv(rows, out_path(opts, "results.csv"));

    std::vector<double> pos, ori;
    for (const auto& r : rows) {
        pos.push_back(r.position_error);
        ori.push_back(r.orientation_error);
    }
    json summary;
    summary["position_error"] = {{"median", mi::stats::quantile_type7(pos, 0.5)},
                                 {"p90", mi::stats::quantile_type7(pos, 0.9)}};
    summary["orientation_error_deg"] = {{"median", mi::stats::quantile_type7(ori, 0.5)}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_evaluate(const CommonOptions& opts, const std::string& results_path) {
    const auto rows = mi::harness::read_results_csv(results_path);
    if (rows.empty())
        throw mi::EmptyInputError("results CSV has no rows");
    std::vector<double> pos, ori;
    for (const auto& r : rows) {
        pos.push_back(r.position_error);
        ori.push_back(r.orientation_error);
    }
    const mi::stats::EmpiricalCdf pos_cdf(pos);
    const mi::stats::EmpiricalCdf ori_cdf(ori);
    mi::harness::write_cdf_csv(pos_cdf.steps(), out_path(opts, "cdf_position_error.csv"));
    mi::harness::write_cdf_csv(ori_cdf.steps(), out_path(opts, "cdf_orientation_error.csv"));
    json summary;
    summary["position_error"] = {{"median", pos_cdf.median()}, {"p90", pos_cdf.quantile(0.9)}};
    summary["orientation_error_deg"] = {{"median", ori_cdf.median()},
                                        {"p90", ori_cdf.quantile(0.9)}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_peb(const CommonOptions& opts, int case_override) {
    auto sc = load_scenario(opts);
    if (case_override > 0)
        sc.peb.case_id = case_override;

    std::vector<mi::calib::Deployment> deps = load_or_synthesize(sc, opts);
    auto anchors = sc.anchors;
    std::vector<mi::ChannelVector> residuals;
    const bool needs_residuals = sc.peb.case_id >= 1 && sc.peb.case_id <= 4;
    if (!opts.calibration_file.empty()) {
        anchors = mi::harness::read_calibration_json(anchors, opts.calibration_file);
    }
    if (needs_residuals || opts.calibration_file.empty()) {
        const auto mode = mi::harness::calibration_mode_from_string(opts.calibration);
        const auto run = mi::harness::run_calibration(sc, deps, mode);
        if (opts.calibration_file.empty())
            anchors = run.anchors;
        residuals = run.evaluation_residuals;
    }
    const auto noise = mi::harness::noise_model_for_case(sc, anchors, sc.peb.case_id, residuals);
    const auto rows = mi::harness::peb_sweep(sc, anchors, deps, noise, noise.label);
    std::ostringstream name;
    name << "peb_case" << sc.peb.case_id << ".csv";
    mi::harness::write_peb_csv(rows, out_path(opts, name.str()));

    std::vector<double> pebs;
    for (const auto& r : rows)
        pebs.push_back(r.peb);
    const mi::stats::EmpiricalCdf cdf(pebs);
    mi::harness::write_cdf_csv(cdf.steps(), out_path(opts, "cdf_" + name.str()));
    json summary;
    summary["peb_m"] = {{"case", sc.peb.case_id},
                        {"median", cdf.median()},
                        {"p05", cdf.quantile(0.05)},
                        {"p95", cdf.quantile(0.95)}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_pipeline(const CommonOptions& opts) {
    const auto sc = load_scenario(opts);
    const auto summary = mi::harness::run_pipeline(sc, opts.out_dir);
    json j;
    j["relative_model_error"] = {{"median", summary.model_error_median},
                                 {"p90", summary.model_error_p90}};
    j["position_error"] = {{"median", summary.position_error_median},
                           {"p90", summary.position_error_p90}};
    j["orientation_error_deg"] = {{"median", summary.orientation_error_median}};
    for (const auto& [label, median] : summary.peb_medians)
        j["peb_median_m"][label] = median;
    std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magneto-inductive 3D localization toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    bool dump_coils = false;
    int case_override = 0;
    std::string results_path;

    const auto add_common = [&](CLI::App* cmd, bool with_measurements = true) {
        cmd->add_option("--config", opts.config_path, "Scenario config JSON");
        cmd->add_option("--out-dir", opts.out_dir, "Output directory");
        cmd->add_option("--seed", opts.seed, "Override the scenario seed");
        if (with_measurements)
            cmd->add_option("--measurements", opts.measurements_path,
                            "Measurement CSV (default: synthesize)");
    };

    auto* synth = app.add_subcommand("synthesize", "Generate thin-wire ground-truth data");
    add_common(synth, false);
    synth->add_flag("--dump-coils", dump_coils, "Also write anchor coil wire paths");

    auto* calib = app.add_subcommand("calibrate", "Fit per-anchor calibration parameters");
    add_common(calib);
    calib->add_option("--calibration", opts.calibration, "none|essential|full");

    auto* loc = app.add_subcommand("localize", "Localize the evaluation subset");
    add_common(loc);
    loc->add_option("--calibration", opts.calibration, "none|essential|full");
    loc->add_option("--calibration-file", opts.calibration_file, "Reuse calibration JSON");

    auto* eval = app.add_subcommand("evaluate", "Error CDFs and quantiles from a results CSV");
    add_common(eval, false);
    eval->add_option("--results", results_path, "Results CSV")->required();

    auto* peb = app.add_subcommand("peb", "Position error bound sweep");
    add_common(peb);
    peb->add_option("--case", case_override, "Noise covariance case 1..6");
    peb->add_option("--calibration", opts.calibration, "none|essential|full");
    peb->add_option("--calibration-file", opts.calibration_file, "Reuse calibration JSON");

    auto* pipe = app.add_subcommand("pipeline", "synthesize + calibrate + localize + peb");
    add_common(pipe, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synthesize(opts, dump_coils);
        if (calib->parsed())
            return cmd_calibrate(opts);
        if (loc->parsed())
            return cmd_localize(opts);
        if (eval->parsed())
            return cmd_evaluate(opts, results_path);
        if (peb->parsed())
            return cmd_peb(opts, case_override);
        if (pipe->parsed())
            return cmd_pipeline(opts);
    } catch (const mi::Error& e) {
        nlohmann::json err;
        err["error"] = {{"type", e.kind()}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = {{"type", "Internal"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 0;
}

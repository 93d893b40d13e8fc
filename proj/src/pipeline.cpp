#include "mi/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "mi/model.hpp"
#include "mi/rng.hpp"
#include "mi/stats.hpp"

namespace mi::harness {

namespace {

std::vector<calib::Deployment> attach_indices(const std::vector<Pose>& poses,
                                              std::vector<ChannelVector> vectors) {
    std::vector<calib::Deployment> out;
    out.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        calib::Deployment d;
        d.index = static_cast<int>(i) + 1;
        d.agent_pose = poses[i];
        d.measured = std::move(vectors[i]);
        out.push_back(std::move(d));
    }
    return out;
}

double gaussian(Rng& rng) {
    const double u1 = std::max(rng.next_double(), 1e-300);
    const double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Perturbed physical poses for the robustness experiment; the recorded
// ground truth stays nominal.
std::vector<Pose> perturb_poses(const std::vector<Pose>& poses, const DeploymentNoise& noise,
                                std::uint64_t seed) {
    std::vector<Pose> out = poses;
    for (std::size_t i = 0; i < out.size(); ++i) {
        Rng rng(Rng::derive(seed ^ 0x6e6f697365ULL, i + 1));
        for (int c = 0; c < 3; ++c)
            out[i].position(c) += noise.position_stddev * gaussian(rng);
        if (noise.orientation_stddev > 0.0) {
            const Vec3& o = out[i].orientation;
            const Vec3 ref = std::abs(o.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
            const Vec3 u = o.cross(ref).normalized();
            const Vec3 v = o.cross(u);
            out[i].orientation =
                (o + noise.orientation_stddev * (gaussian(rng) * u + gaussian(rng) * v))
                    .normalized();
        }
    }
    return out;
}

} // namespace

std::vector<calib::Deployment> synthesize_measurements(const Scenario& scenario) {
    const auto poses = scenario.deployment_poses();
    const auto physical =
        scenario.noise.enabled() ? perturb_poses(poses, scenario.noise, scenario.seed) : poses;
    auto vectors = emsim::synthesize_dataset(scenario.sim_anchors(), physical,
                                             scenario.agent_winding,
                                             scenario.agent_coil.resistance,
                                             scenario.environment.carrier_frequency,
                                             scenario.environment.permeability);
    return attach_indices(poses, std::move(vectors));
}

std::vector<calib::Deployment> model_measurements(const Scenario& scenario,
                                                  const std::vector<Anchor>& anchors) {
    const auto poses = scenario.deployment_poses();
    std::vector<ChannelVector> vectors(poses.size());
    std::vector<std::string> failures(poses.size());
    const auto n = static_cast<std::ptrdiff_t>(poses.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto di = static_cast<std::size_t>(i);
        try {
            vectors[di] = model::channel_vector(anchors, poses[di], scenario.agent_coil,
                                                scenario.environment);
        } catch (const Error& e) {
            failures[di] = e.what();
        }
    }
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) {
            std::ostringstream oss;
            oss << "deployment " << (i + 1) << ": " << failures[i];
            throw ZeroDistanceError(oss.str());
        }
    }
    return attach_indices(poses, std::move(vectors));
}

CalibrationMode calibration_mode_from_string(const std::string& s) {
    if (s == "none")
        return CalibrationMode::None;
    if (s == "essential")
        return CalibrationMode::Essential;
    if (s == "full")
        return CalibrationMode::Full;
    throw ConfigError("calibration mode must be none|essential|full, got '" + s + "'");
}

CalibrationRun run_calibration(const Scenario& scenario,
                               const std::vector<calib::Deployment>& deployments,
                               CalibrationMode mode) {
    CalibrationRun out;
    out.anchors = scenario.anchors;

    // The evaluation subset is the same for every mode so the reported model
    // errors are directly comparable across none/essential/full.
    const calib::DataSplit split = calib::split_odd_even(deployments);
    if (mode != CalibrationMode::None) {
        out.anchors = calib::essential_calibrate_all(out.anchors, split.calibration,
                                                     scenario.agent_coil, scenario.environment);
        if (mode == CalibrationMode::Full) {
            const auto results =
                calib::full_calibrate(out.anchors, split.calibration, scenario.priors(),
                                      scenario.agent_coil, scenario.environment);
            for (std::size_t i = 0; i < results.size(); ++i)
                out.anchors[i] = results[i].anchor;
        }
    }
    out.evaluation_error = calib::relative_model_error(
        split.evaluation, out.anchors, scenario.agent_coil, scenario.environment);
    out.evaluation_residuals.reserve(split.evaluation.size());
    for (const auto& dep : split.evaluation) {
        const ChannelVector h_model = model::channel_vector(
            out.anchors, dep.agent_pose, scenario.agent_coil, scenario.environment);
        out.evaluation_residuals.push_back(dep.measured - h_model);
    }
    return out;
}

std::vector<LocalizationRow> localize_batch(const Scenario& scenario,
                                            const std::vector<Anchor>& anchors,
                                            const std::vector<calib::Deployment>& deployments) {
    std::vector<LocalizationRow> rows(deployments.size());
    std::vector<std::string> failures(deployments.size());
    const auto n = static_cast<std::ptrdiff_t>(deployments.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto di = static_cast<std::size_t>(i);
        const auto& dep = deployments[di];
        try {
            locate::WlsConfig cfg = scenario.wls;
            cfg.rng_seed = Rng::derive(scenario.seed, static_cast<std::uint64_t>(dep.index));
            const locate::LocationEstimate est = locate::wls_localize(
                dep.measured, anchors, scenario.agent_coil, scenario.environment, cfg);
            LocalizationRow row;
            row.index = dep.index;
            row.truth = dep.agent_pose;
            row.estimate = Pose{est.position, est.orientation};
            row.position_error = (est.position - dep.agent_pose.position).norm();
            row.orientation_error =
                locate::orientation_error(est.orientation, dep.agent_pose.orientation);
            row.residual = est.weighted_residual;
            row.converged = est.converged;
            rows[di] = row;
        } catch (const Error& e) {
            failures[di] = e.what();
        }
    }
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) {
            std::ostringstream oss;
            oss << "deployment " << deployments[i].index << ": " << failures[i];
            throw InvalidSpecError(oss.str());
        }
    }
    return rows;
}

crlb::NoiseModel noise_model_for_case(const Scenario& scenario,
                                      const std::vector<Anchor>& anchors, int case_id,
                                      const std::vector<ChannelVector>& residuals) {
    switch (case_id) {
    case 1:
    case 2:
    case 3:
    case 4: {
        // Empirical covariance; the cases differ only in where the residual
        // samples come from (model errors, stationary fluctuations, ...).
        if (residuals.empty())
            throw ConfigError("empirical PEB case needs residual samples");
        std::ostringstream label;
        label << "case" << case_id;
        return crlb::cov_empirical(residuals, label.str());
    }
    case 5: {
        auto nm = crlb::cov_background_correlated(
            anchors, scenario.environment, scenario.peb.background_psd_dbm_hz,
            scenario.peb.bandwidth_hz, scenario.peb.probe_dbm, scenario.peb.n0_dbm_hz);
        nm.label = "case5";
        return nm;
    }
    case 6: {
        auto nm = crlb::cov_thermal_independent(anchors.size(), scenario.peb.n0_dbm_hz,
                                                scenario.peb.bandwidth_hz,
                                                scenario.peb.probe_dbm);
        nm.label = "case6";
        return nm;
    }
    default:
        throw ConfigError("PEB case must be in 1..6");
    }
}

std::vector<PebRow> peb_sweep(const Scenario& scenario, const std::vector<Anchor>& anchors,
                              const std::vector<calib::Deployment>& deployments,
                              const crlb::NoiseModel& noise, const std::string& label) {
    std::vector<PebRow> rows(deployments.size());
    std::vector<std::string> failures(deployments.size());
    const auto n = static_cast<std::ptrdiff_t>(deployments.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto di = static_cast<std::size_t>(i);
        const auto& dep = deployments[di];
        try {
            const auto [az, pol] = model::unit_to_spherical(dep.agent_pose.orientation);
            crlb::EstimationParameter eta;
            eta.position = dep.agent_pose.position;
            eta.azimuth = az;
            eta.polar = pol;
            const crlb::PebResult r = crlb::position_error_bound(
                eta, anchors, scenario.agent_coil, scenario.environment, noise);
            rows[di] = PebRow{dep.index, dep.agent_pose, r.peb, label};
        } catch (const Error& e) {
            failures[di] = e.what();
        }
    }
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) {
            std::ostringstream oss;
            oss << "deployment " << deployments[i].index << ": " << failures[i];
            throw SingularCovarianceError(oss.str());
        }
    }
    return rows;
}

PipelineSummary run_pipeline(const Scenario& scenario, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    const auto deployments = synthesize_measurements(scenario);
    write_measurements_csv(deployments, path("measurements.csv"));

    const CalibrationRun calib_run = run_calibration(scenario, deployments, CalibrationMode::Full);
    write_calibration_json(calib_run.anchors, path("calibration.json"));
    write_model_error_csv(calib_run.evaluation_error, path("model_error.csv"));

    const calib::DataSplit split = calib::split_odd_even(deployments);
    const auto rows = localize_batch(scenario, calib_run.anchors, split.evaluation);
    write_results_csv(rows, path("results.csv"));

    std::vector<double> pos_errors, orient_errors;
    pos_errors.reserve(rows.size());
    orient_errors.reserve(rows.size());
    for (const auto& r : rows) {
        pos_errors.push_back(r.position_error);
        orient_errors.push_back(r.orientation_error);
    }
    const stats::EmpiricalCdf pos_cdf(pos_errors);
    const stats::EmpiricalCdf orient_cdf(orient_errors);
    write_cdf_csv(pos_cdf.steps(), path("cdf_position_error.csv"));
    write_cdf_csv(orient_cdf.steps(), path("cdf_orientation_error.csv"));

    PipelineSummary summary;
    summary.model_error_median = calib_run.evaluation_error.median;
    summary.model_error_p90 = calib_run.evaluation_error.percentile90;
    summary.position_error_median = pos_cdf.median();
    summary.position_error_p90 = pos_cdf.quantile(0.9);
    summary.orientation_error_median = orient_cdf.median();

    for (const int case_id : {4, 5, 6}) {
        const crlb::NoiseModel noise = noise_model_for_case(
            scenario, calib_run.anchors, case_id, calib_run.evaluation_residuals);
        const auto peb_rows =
            peb_sweep(scenario, calib_run.anchors, deployments, noise, noise.label);
        std::ostringstream name;
        name << "peb_case" << case_id << ".csv";
        write_peb_csv(peb_rows, path(name.str()));
        std::vector<double> pebs;
        pebs.reserve(peb_rows.size());
        for (const auto& r : peb_rows)
            pebs.push_back(r.peb);
        summary.peb_medians.emplace_back(noise.label, stats::quantile_type7(pebs, 0.5));
    }
    return summary;
}

} // namespace mi::harness

#pragma once

#include <string>
#include <vector>

#include "mi/crlb.hpp"
#include "mi/io.hpp"
#include "mi/scenario.hpp"

namespace mi::harness {

// Ground-truth channel vectors from the thin-wire simulator, one deployment
// per grid pose (1-based indices).
std::vector<calib::Deployment> synthesize_measurements(const Scenario& scenario);

// Channel vectors from the dipole model itself (consistency experiments).
std::vector<calib::Deployment> model_measurements(const Scenario& scenario,
                                                  const std::vector<Anchor>& anchors);

enum class CalibrationMode { None, Essential, Full };

CalibrationMode calibration_mode_from_string(const std::string& s);

struct CalibrationRun {
    std::vector<Anchor> anchors;            // calibrated state
    calib::ModelErrorStats evaluation_error;
    std::vector<ChannelVector> evaluation_residuals; // h_meas - h_model per eval deployment
};

CalibrationRun run_calibration(const Scenario& scenario,
                               const std::vector<calib::Deployment>& deployments,
                               CalibrationMode mode);

// WLS localization of each deployment; parallel, per-deployment RNG streams
// derived from the scenario seed so results are scheduling-independent.
std::vector<LocalizationRow> localize_batch(const Scenario& scenario,
                                            const std::vector<Anchor>& anchors,
                                            const std::vector<calib::Deployment>& deployments);

crlb::NoiseModel noise_model_for_case(const Scenario& scenario,
                                      const std::vector<Anchor>& anchors, int case_id,
                                      const std::vector<ChannelVector>& residuals);

std::vector<PebRow> peb_sweep(const Scenario& scenario, const std::vector<Anchor>& anchors,
                              const std::vector<calib::Deployment>& deployments,
                              const crlb::NoiseModel& noise, const std::string& label);

struct PipelineSummary {
    double model_error_median = 0.0;
    double model_error_p90 = 0.0;
    double position_error_median = 0.0;
    double position_error_p90 = 0.0;
    double orientation_error_median = 0.0;
    std::vector<std::pair<std::string, double>> peb_medians;
};

// synthesize -> calibrate (essential + full) -> localize evaluation set ->
// error CDFs -> PEB sweep (cases 4, 5, 6). Writes all artifacts to out_dir.
PipelineSummary run_pipeline(const Scenario& scenario, const std::string& out_dir);

} // namespace mi::harness

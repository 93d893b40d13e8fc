#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mi/calib.hpp"
#include "mi/types.hpp"

namespace mi::harness {

// Measurement CSV: i, px, py, pz, ox, oy, oz, h1_re, h1_im, ..., hN_re, hN_im
void write_measurements_csv(const std::vector<calib::Deployment>& deployments,
                            const std::string& path);
std::vector<calib::Deployment> read_measurements_csv(const std::string& path);

struct LocalizationRow {
    int index = 0;
    Pose truth;
    Pose estimate;
    double position_error = 0.0;      // m
    double orientation_error = 0.0;   // deg
    double residual = 0.0;
    bool converged = false;
};

void write_results_csv(const std::vector<LocalizationRow>& rows, const std::string& path);
std::vector<LocalizationRow> read_results_csv(const std::string& path);

void write_cdf_csv(const std::vector<std::pair<double, double>>& steps, const std::string& path);

struct PebRow {
    int index = 0;
    Pose pose;
    double peb = 0.0; // m
    std::string label;
};

void write_peb_csv(const std::vector<PebRow>& rows, const std::string& path);

// Per-anchor calibration state.
void write_calibration_json(const std::vector<Anchor>& anchors, const std::string& path);
std::vector<Anchor> read_calibration_json(const std::vector<Anchor>& nominal,
                                          const std::string& path);

// Per-link relative model error: i, anchor, value
void write_model_error_csv(const calib::ModelErrorStats& stats, const std::string& path);

std::string format_double(double v); // shortest round-trip decimal, deterministic

} // namespace mi::harness

#pragma once

#include <cstddef>
#include <vector>

#include "mi/types.hpp"

namespace mi::calib {

// One visited agent pose with its measured channel vector. Indices follow the
// acquisition convention: 1-based, unique within a dataset.
struct Deployment {
    int index = 0;
    Pose agent_pose;
    ChannelVector measured;
};

// Odd indices evaluate, even indices calibrate.
struct DataSplit {
    std::vector<Deployment> calibration;
    std::vector<Deployment> evaluation;
};

DataSplit split_odd_even(const std::vector<Deployment>& deployments);

// Informative prior on an anchor pose; angles are centered at the installed
// nominal orientation.
struct PosePrior {
    Vec3 position_mean{Vec3::Zero()};
    double position_stddev = 0.02;                  // m, per axis
    double angle_stddev = 2.0 * M_PI / 180.0;       // rad, azimuth and polar
};

struct EssentialResult {
    Complex xi{1.0, 0.0};
    CVec3 b_nlos{CVec3::Zero()};
    double mean_sq_residual = 0.0; // per complex sample, at the solution
};

// Linear least-squares fit of (xi, b_NLOS) for one anchor via the
// reparametrization u = xi, v = xi * b_NLOS, which is exactly linear in
// (u, v) in C^4 for known deployments. Throws RankDeficient when the
// deployment poses cannot separate the four parameters and NearZeroXi when
// |u| < 1e-6 (b_NLOS = v/u recovery unstable).
EssentialResult essential_calibrate(const Anchor& anchor, std::size_t anchor_index,
                                    const std::vector<Deployment>& calibration,
                                    const CoilSpec& agent_coil, const Environment& env);

struct FullCalibrationOptions {
    int lm_max_iterations = 100;
    double lm_initial_damping = 1e-3;
    double step_tolerance = 1e-9;
    double prior_violation_sigmas = 5.0;
};

struct FullResult {
    Anchor anchor; // updated pose, xi, b_NLOS
    bool converged = true;
    bool prior_violation = false; // optimum beyond prior_violation_sigmas
    double map_objective = 0.0;
};

// MAP pose refinement for one anchor: Levenberg-Marquardt over the 5 pose
// parameters (position, azimuth, polar) with (xi, b_NLOS) profiled out by the
// inner linear solve at every iterate. The likelihood scale is the essential
// calibration mean squared residual at the nominal pose.
FullResult full_calibrate_anchor(const Anchor& nominal, std::size_t anchor_index,
                                 const std::vector<Deployment>& calibration,
                                 const PosePrior& prior, const CoilSpec& agent_coil,
                                 const Environment& env,
                                 const FullCalibrationOptions& options = {});

// Per-anchor essential calibration for all anchors (parallel, independent).
std::vector<Anchor> essential_calibrate_all(const std::vector<Anchor>& anchors,
                                            const std::vector<Deployment>& calibration,
                                            const CoilSpec& agent_coil, const Environment& env);

std::vector<FullResult> full_calibrate(const std::vector<Anchor>& anchors,
                                       const std::vector<Deployment>& calibration,
                                       const std::vector<PosePrior>& priors,
                                       const CoilSpec& agent_coil, const Environment& env,
                                       const FullCalibrationOptions& options = {});

// Relative model error |h_meas - h_model| / |h_meas| over the evaluation set.
struct ModelErrorStats {
    std::vector<double> values;               // deployment-major, then anchor
    std::vector<std::pair<int, int>> links;   // (deployment index, 1-based anchor) per value
    std::size_t excluded = 0;                 // links with |h_meas| below guard
    double median = 0.0;
    double percentile90 = 0.0;
};

ModelErrorStats relative_model_error(const std::vector<Deployment>& evaluation,
                                     const std::vector<Anchor>& anchors,
                                     const CoilSpec& agent_coil, const Environment& env,
                                     double magnitude_guard = 1e-12);

} // namespace mi::calib

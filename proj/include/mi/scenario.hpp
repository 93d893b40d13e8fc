#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mi/calib.hpp"
#include "mi/emsim.hpp"
#include "mi/locate.hpp"
#include "mi/types.hpp"

namespace mi::harness {

// Deployment grid: a regular lattice of positions visited with a fixed list
// of orientations (position-major indexing, 1-based deployment indices).
struct GridSpec {
    Vec3 lower{0.75, 0.75, 0.3};
    Vec3 upper{2.25, 2.25, 1.5};
    int count_x = 3;
    int count_y = 3;
    int count_z = 5;
    std::vector<Vec3> orientations; // unit axes; defaults filled by default_grid()
};

struct PebParams {
    int case_id = 6;
    double n0_dbm_hz = -174.0;
    double bandwidth_hz = 5000.0;
    double probe_dbm = 6.0;
    double background_psd_dbm_hz = -120.0; // documented placeholder, not a measured figure
};

struct CalibrationParams {
    double position_stddev = 0.02;            // m, per axis
    double angle_stddev = 2.0 * M_PI / 180.0; // rad
};

// Opt-in robustness experiment: the synthetic data is generated at poses
// perturbed by this noise while the recorded ground truth stays nominal
// (positioner inaccuracy). Both default to off.
struct DeploymentNoise {
    double position_stddev = 0.0;    // m, per axis
    double orientation_stddev = 0.0; // rad
    bool enabled() const { return position_stddev > 0.0 || orientation_stddev > 0.0; }
};

struct Scenario {
    Environment environment;
    CoilSpec agent_coil;
    emsim::SpiderwebSpec agent_winding;
    std::vector<Anchor> anchors;                 // nominal, uncalibrated
    std::vector<emsim::SpiderwebSpec> windings;  // one per anchor
    GridSpec grid;
    locate::WlsConfig wls;
    CalibrationParams calibration;
    DeploymentNoise noise;
    PebParams peb;
    std::uint64_t seed = 1;

    std::vector<Pose> deployment_poses() const;
    std::vector<emsim::SimAnchor> sim_anchors() const;
    std::vector<calib::PosePrior> priors() const;
};

// The 8-anchor 3 m x 3 m setup: corner anchors (odd indices) 2 m above the
// floor, edge-midpoint anchors (even) at 0.68 m, axes aimed at the room
// center; 45 lattice positions x 6 orientations (canonical axes plus the
// 45-degree diagonals in the xy, yz and xz planes).
Scenario default_scenario();

Scenario scenario_from_json_file(const std::string& path);
Scenario scenario_from_json_text(const std::string& text);

} // namespace mi::harness

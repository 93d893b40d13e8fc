#pragma once

#include <cstdint>
#include <vector>

#include "mi/types.hpp"

namespace mi::locate {

struct WlsConfig {
    int num_initializations = 3;
    // Sampling box for random initializations. When empty (min > max), the
    // anchor bounding box inflated by 10% is used.
    Vec3 init_lower{Vec3::Ones()};
    Vec3 init_upper{-Vec3::Ones()};
    int lm_max_iterations = 100;
    double lm_initial_damping = 1e-3;
    double step_tolerance = 1e-6;     // m
    double residual_tolerance = 1e-12;
    std::uint64_t rng_seed = 0;
    // Rank the random draws together with a coarse objective lattice and
    // descend from the best-separated candidates. Off: descend from the raw
    // random draws only.
    bool lattice_preselect = true;

    bool has_init_box() const {
        return (init_upper - init_lower).minCoeff() > 0.0;
    }
};

struct LocationEstimate {
    Vec3 position{Vec3::Zero()};
    Vec3 orientation{Vec3::UnitZ()};
    double weighted_residual = 0.0; // ||W (h_meas - A^T o)|| at the estimate
    bool converged = false;
    int initialization_index = 0;
    bool low_anchor_warning = false; // N < 5 unknowns vs. measurements
};

// Adaptive anchor weights d_n^3 / |gamma_n| as a diagonal (returned as the
// vector of diagonal entries, all strictly positive).
Eigen::VectorXd weight_matrix(const Vec3& agent_position, const std::vector<Anchor>& anchors,
                              const CoilSpec& agent_coil, const Environment& env,
                              double d_min = kDefaultMinDistance);

// Steering matrix A in C^{3 x N} with columns gamma_n (b_LOS,n + b_NLOS,n),
// so that h_model = A^T o_ag.
Eigen::Matrix3Xcd steering_matrix(const Vec3& agent_position, const std::vector<Anchor>& anchors,
                                  const CoilSpec& agent_coil, const Environment& env,
                                  double d_min = kDefaultMinDistance);

struct OrientationSolve {
    Vec3 orientation{Vec3::UnitZ()};
    double objective = 0.0; // ||W (h_meas - A^T o)||^2 at the solution
    bool degenerate = false;
};

// Global minimizer of ||W (h_meas - A^T o)||^2 subject to ||o|| = 1, via the
// eigendecomposition/secular-equation method for norm-constrained least
// squares on the real-stacked 2N x 3 system.
OrientationSolve orientation_solve(const Eigen::VectorXd& weights,
                                   const Eigen::Matrix3Xcd& steering,
                                   const ChannelVector& h_meas);

// WLS localization: multi-start Levenberg-Marquardt on the 3D position
// objective; weights, steering matrix and the constrained orientation
// estimate are recomputed at every iterate. Deterministic given the seed.
LocationEstimate wls_localize(const ChannelVector& h_meas, const std::vector<Anchor>& anchors,
                              const CoilSpec& agent_coil, const Environment& env,
                              const WlsConfig& config = {});

// Reference 5D solver: unweighted nonlinear least squares over position and
// spherical orientation angles from a single initialization.
LocationEstimate baseline_5d_nls(const ChannelVector& h_meas, const std::vector<Anchor>& anchors,
                                 const CoilSpec& agent_coil, const Environment& env,
                                 const Vec3& init_position, const Vec3& init_orientation,
                                 int lm_max_iterations = 100);

// Angle between two unit axes in degrees, range [0, 180].
double orientation_error(const Vec3& estimated, const Vec3& truth);

} // namespace mi::locate

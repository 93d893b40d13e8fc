#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mi/types.hpp"

namespace mi::crlb {

// Real 2N x 2N covariance of the stacked model error [Re eps; Im eps].
struct NoiseModel {
    Eigen::MatrixXd covariance;
    std::string label;
    bool regularized = false; // sample covariance was rank-deficient
};

// 5D estimation parameter eta = [p^T, azimuth, polar].
struct EstimationParameter {
    Vec3 position{Vec3::Zero()};
    double azimuth = 0.0;
    double polar = 0.0;
};

// Analytic Jacobian of g = [Re h_model; Im h_model] w.r.t. eta, 2N x 5.
// Columns: x, y, z, azimuth, polar.
Eigen::MatrixXd model_jacobian(const EstimationParameter& eta, const std::vector<Anchor>& anchors,
                               const CoilSpec& agent_coil, const Environment& env,
                               double d_min = kDefaultMinDistance);

// 5 x 5 Fisher information J = D^T Sigma^{-1} D with D = dg/deta, computed
// via the Cholesky factor of Sigma (no explicit inverse).
Eigen::MatrixXd fisher_information(const EstimationParameter& eta,
                                   const std::vector<Anchor>& anchors,
                                   const CoilSpec& agent_coil, const Environment& env,
                                   const NoiseModel& noise);

struct PebResult {
    double peb = 0.0;    // meters; +inf when the FIM is singular
    bool singular = false;
    bool pole = false;   // polar angle at a pole; reduced 4x4 FIM was used
};

// PEB = sqrt(trace((J^{-1})_{1:3,1:3})). At polar in {0, pi} the azimuth
// column vanishes; the bound is then evaluated with azimuth fixed.
PebResult position_error_bound(const EstimationParameter& eta,
                               const std::vector<Anchor>& anchors, const CoilSpec& agent_coil,
                               const Environment& env, const NoiseModel& noise);

// Sample covariance of stacked residual vectors, mean-subtracted. Fewer than
// 2N+1 samples yields a regularized estimate (Sigma + lambda I with
// lambda = 1e-12 trace/2N) flagged via `regularized`.
NoiseModel cov_empirical(const std::vector<ChannelVector>& residuals,
                         const std::string& label = "empirical");

// Independent thermal noise of power N0*B per anchor, referenced to the
// probe power: sigma^2 = 10^((N0 - P_probe)/10) * B, split evenly between
// the real and imaginary parts.
NoiseModel cov_thermal_independent(std::size_t anchor_count, double n0_dbm_hz,
                                   double bandwidth_hz, double probe_dbm);

// sin(x)/x with the series limit at 0.
double spherical_bessel_j0(double x);

using CorrelationKernel = std::function<double(double)>;

// Thermal floor plus spatially correlated background noise: the background
// cross-correlation between anchors m and n is kernel(k d_mn) * (o_m . o_n),
// applied identically to the Re and Im blocks. The result is symmetrized and
// eigenvalue-clipped to PSD.
NoiseModel cov_background_correlated(const std::vector<Anchor>& anchors, const Environment& env,
                                     double background_psd_dbm_hz, double bandwidth_hz,
                                     double probe_dbm, double n0_dbm_hz = -174.0,
                                     const CorrelationKernel& kernel = spherical_bessel_j0);

} // namespace mi::crlb

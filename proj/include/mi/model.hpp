#pragma once

#include <utility>
#include <vector>

#include "mi/types.hpp"

namespace mi::model {

// Geometry of one agent-anchor link: distance d, direction e from anchor to
// agent, and the near-/far-field vectors generated by the anchor axis.
struct LinkGeometry {
    double distance = 0.0;
    Vec3 direction{Vec3::Zero()};  // e, unit
    Vec3 near_field{Vec3::Zero()}; // b_nf = (3 e e^T - I) o_an / 2
    Vec3 far_field{Vec3::Zero()};  // b_ff = (I - e e^T) o_an, orthogonal to e
};

LinkGeometry link_geometry(const Pose& anchor_pose, const Vec3& agent_position,
                           double d_min = kDefaultMinDistance);

// Direct-path field vector
//   b_LOS = j e^{-jkd} ( (1/(kd)^3 + j/(kd)^2) b_nf + 1/(2kd) b_ff ).
CVec3 direct_path_field(const LinkGeometry& geometry, double wave_number);

// Technical coefficient
//   gamma = mu S_ag S_an nu_ag nu_an / sqrt(4 R_ag R_an) * k^3 f_c * xi.
Complex coupling_coefficient(const CoilSpec& agent_coil, const CoilSpec& anchor_coil,
                             const Environment& env, Complex matching_factor);

// Full complex baseband channel coefficient h = gamma (b_LOS + b_NLOS)^T o_ag.
// The product with o_ag is the plain (unconjugated) transpose.
Complex channel_coefficient(const Anchor& anchor, const Pose& agent,
                            const CoilSpec& agent_coil, const Environment& env,
                            double d_min = kDefaultMinDistance);

// Reactive-only variant: drops the retardation factor and the radiative
// 1/(kd)^2 and 1/(2kd) terms. Valid for kd << 1; used as the dipole limit the
// thin-wire simulator must agree with.
Complex channel_coefficient_quasistatic(const Anchor& anchor, const Pose& agent,
                                        const CoilSpec& agent_coil, const Environment& env,
                                        double d_min = kDefaultMinDistance);

// Stacks channel_coefficient over all anchors.
ChannelVector channel_vector(const std::vector<Anchor>& anchors, const Pose& agent,
                             const CoilSpec& agent_coil, const Environment& env,
                             double d_min = kDefaultMinDistance);

// o = (sin(polar) cos(azimuth), sin(polar) sin(azimuth), cos(polar))
Vec3 spherical_to_unit(double azimuth, double polar);

// Inverse; at the poles (|o_z| = 1) the azimuth is 0 by convention.
std::pair<double, double> unit_to_spherical(const Vec3& o);

// One steering column a_n = gamma (b_LOS + b_NLOS) together with its analytic
// gradient w.r.t. the agent position. dcolumn_dposition(i, j) = d a_i / d p_j.
struct SteeringDerivative {
    CVec3 column{CVec3::Zero()};
    Eigen::Matrix3cd dcolumn_dposition{Eigen::Matrix3cd::Zero()};
    double distance = 0.0;
    Vec3 direction{Vec3::Zero()};
};

SteeringDerivative steering_derivative(const Anchor& anchor, const Vec3& agent_position,
                                       const CoilSpec& agent_coil, const Environment& env,
                                       double d_min = kDefaultMinDistance);

// Channel value and analytic derivatives w.r.t. the 5D estimation parameter
// (agent position, azimuth, polar angle of the agent axis).
struct ChannelDerivative {
    Complex value{0.0, 0.0};
    Eigen::RowVector3cd dposition{Eigen::RowVector3cd::Zero()};
    Complex dazimuth{0.0, 0.0};
    Complex dpolar{0.0, 0.0};
};

ChannelDerivative channel_derivative(const Anchor& anchor, const Vec3& agent_position,
                                     double azimuth, double polar,
                                     const CoilSpec& agent_coil, const Environment& env,
                                     double d_min = kDefaultMinDistance);

} // namespace mi::model

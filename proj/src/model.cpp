#include "mi/model.hpp"

#include <cmath>
#include <sstream>

namespace mi::model {

namespace {

constexpr Complex kImag{0.0, 1.0};

// Radial profile of the near-field term, f_nf(q) = j e^{-jq} (q^-3 + j q^-2),
// and of the far-field term, f_ff(q) = j e^{-jq} / (2q), with q = kd.
Complex field_profile_nf(double q) {
    return kImag * std::exp(-kImag * q) * Complex(1.0 / (q * q * q), 1.0 / (q * q));
}

Complex field_profile_ff(double q) {
    return kImag * std::exp(-kImag * q) / (2.0 * q);
}

// d/dq of the profiles: for f = j e^{-jq} g(q), f' = e^{-jq} (g + j g').
Complex field_profile_nf_deriv(double q) {
    const Complex g(1.0 / (q * q * q), 1.0 / (q * q));
    const Complex gp(-3.0 / (q * q * q * q), -2.0 / (q * q * q));
    return std::exp(-kImag * q) * (g + kImag * gp);
}

Complex field_profile_ff_deriv(double q) {
    const Complex g(1.0 / (2.0 * q), 0.0);
    const Complex gp(-1.0 / (2.0 * q * q), 0.0);
    return std::exp(-kImag * q) * (g + kImag * gp);
}

// Unconjugated transpose product a^T b (Eigen's dot() would conjugate a).
Complex dot_u(const CVec3& a, const Vec3& b) {
    return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

} // namespace

LinkGeometry link_geometry(const Pose& anchor_pose, const Vec3& agent_position, double d_min) {
    const Vec3 delta = agent_position - anchor_pose.position;
    const double d = delta.norm();
    if (d < d_min) {
        std::ostringstream oss;
        oss << "agent-anchor distance " << d << " m below guard " << d_min << " m";
        throw ZeroDistanceError(oss.str());
    }
    LinkGeometry g;
    g.distance = d;
    g.direction = delta / d;
    const double axial = g.direction.dot(anchor_pose.orientation); // e^T o_an
    g.near_field = 1.5 * axial * g.direction - 0.5 * anchor_pose.orientation;
    g.far_field = anchor_pose.orientation - axial * g.direction;
    return g;
}

CVec3 direct_path_field(const LinkGeometry& geometry, double wave_number) {
    const double q = wave_number * geometry.distance;
    if (!(q > 0.0))
        throw ZeroDistanceError("kd must be positive");
    return field_profile_nf(q) * geometry.near_field.cast<Complex>() +
           field_profile_ff(q) * geometry.far_field.cast<Complex>();
}

Complex coupling_coefficient(const CoilSpec& agent_coil, const CoilSpec& anchor_coil,
                             const Environment& env, Complex matching_factor) {
    validate_coil(agent_coil);
    validate_coil(anchor_coil);
    const double k = env.wave_number();
    const double scale = env.permeability * agent_coil.surface_area * anchor_coil.surface_area *
                         static_cast<double>(agent_coil.turns) *
                         static_cast<double>(anchor_coil.turns) /
                         std::sqrt(4.0 * agent_coil.resistance * anchor_coil.resistance);
    return scale * k * k * k * env.carrier_frequency * matching_factor;
}

Complex channel_coefficient(const Anchor& anchor, const Pose& agent, const CoilSpec& agent_coil,
                            const Environment& env, double d_min) {
    const LinkGeometry g = link_geometry(anchor.pose, agent.position, d_min);
    const CVec3 b_los = direct_path_field(g, env.wave_number());
    const Complex gamma =
        coupling_coefficient(agent_coil, anchor.coil, env, anchor.matching_factor);
    return gamma * dot_u(b_los + anchor.multipath_field, agent.orientation);
}

Complex channel_coefficient_quasistatic(const Anchor& anchor, const Pose& agent,
                                        const CoilSpec& agent_coil, const Environment& env,
                                        double d_min) {
    const LinkGeometry g = link_geometry(anchor.pose, agent.position, d_min);
    const double q = env.wave_number() * g.distance;
    const Complex gamma =
        coupling_coefficient(agent_coil, anchor.coil, env, anchor.matching_factor);
    const Complex b_axis = kImag / (q * q * q) * g.near_field.dot(agent.orientation);
    return gamma * b_axis;
}

ChannelVector channel_vector(const std::vector<Anchor>& anchors, const Pose& agent,
                             const CoilSpec& agent_coil, const Environment& env, double d_min) {
    if (anchors.empty())
        throw InvalidSpecError("channel_vector requires at least one anchor");
    ChannelVector h(static_cast<Eigen::Index>(anchors.size()));
    for (std::size_t n = 0; n < anchors.size(); ++n) {
        try {
            h(static_cast<Eigen::Index>(n)) =
                channel_coefficient(anchors[n], agent, agent_coil, env, d_min);
        } catch (const Error& e) {
            std::ostringstream oss;
            oss << "anchor " << n << ": " << e.what();
            throw ZeroDistanceError(oss.str());
        }
    }
    return h;
}

Vec3 spherical_to_unit(double azimuth, double polar) {
    const double st = std::sin(polar);
    return Vec3(st * std::cos(azimuth), st * std::sin(azimuth), std::cos(polar));
}

std::pair<double, double> unit_to_spherical(const Vec3& o) {
    const double oz = std::clamp(o.z(), -1.0, 1.0);
    const double polar = std::acos(oz);
    if (std::abs(o.x()) == 0.0 && std::abs(o.y()) == 0.0)
        return {0.0, polar};
    return {std::atan2(o.y(), o.x()), polar};
}

SteeringDerivative steering_derivative(const Anchor& anchor, const Vec3& agent_position,
                                       const CoilSpec& agent_coil, const Environment& env,
                                       double d_min) {
    const LinkGeometry g = link_geometry(anchor.pose, agent_position, d_min);
    const double k = env.wave_number();
    const double q = k * g.distance;
    const Complex gamma =
        coupling_coefficient(agent_coil, anchor.coil, env, anchor.matching_factor);

    const Complex f_nf = field_profile_nf(q);
    const Complex f_ff = field_profile_ff(q);
    const CVec3 b_los = f_nf * g.near_field.cast<Complex>() + f_ff * g.far_field.cast<Complex>();

    // d b_LOS / d p = k (f_nf' b_nf + f_ff' b_ff) e^T + (1.5 f_nf - f_ff) G,
    // with G = d(s e)/dp, s = e^T o_an, projector P = (I - e e^T)/d.
    const Eigen::Matrix3d projector =
        (Eigen::Matrix3d::Identity() - g.direction * g.direction.transpose()) / g.distance;
    const double axial = g.direction.dot(anchor.pose.orientation);
    const Vec3 ds_dp = projector * anchor.pose.orientation;
    const Eigen::Matrix3d grad_se = g.direction * ds_dp.transpose() + axial * projector;

    const CVec3 radial = k * (field_profile_nf_deriv(q) * g.near_field.cast<Complex>() +
                              field_profile_ff_deriv(q) * g.far_field.cast<Complex>());

    SteeringDerivative out;
    out.column = gamma * (b_los + anchor.multipath_field);
    out.dcolumn_dposition =
        gamma * (radial * g.direction.transpose().cast<Complex>() +
                 (1.5 * f_nf - f_ff) * grad_se.cast<Complex>());
    out.distance = g.distance;
    out.direction = g.direction;
    return out;
}

ChannelDerivative channel_derivative(const Anchor& anchor, const Vec3& agent_position,
                                     double azimuth, double polar, const CoilSpec& agent_coil,
                                     const Environment& env, double d_min) {
    const SteeringDerivative sd =
        steering_derivative(anchor, agent_position, agent_coil, env, d_min);
    const Vec3 o = spherical_to_unit(azimuth, polar);
    const double st = std::sin(polar);
    const double ct = std::cos(polar);
    const Vec3 do_daz(-st * std::sin(azimuth), st * std::cos(azimuth), 0.0);
    const Vec3 do_dpol(ct * std::cos(azimuth), ct * std::sin(azimuth), -st);

    ChannelDerivative out;
    out.value = dot_u(sd.column, o);
    out.dposition = o.cast<Complex>().transpose() * sd.dcolumn_dposition;
    out.dazimuth = dot_u(sd.column, do_daz);
    out.dpolar = dot_u(sd.column, do_dpol);
    return out;
}

} // namespace mi::model

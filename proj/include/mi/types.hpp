#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "mi/errors.hpp"

namespace mi {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

// Stacked per-anchor channel coefficients h_1..h_N.
using ChannelVector = Eigen::VectorXcd;

inline constexpr double kVacuumPermeability = 4.0e-7 * 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kDefaultMinDistance = 1e-3; // guard against the 1/(kd)^3 singularity

// Center position plus unit axis orientation of a coil.
struct Pose {
    Vec3 position{Vec3::Zero()};
    Vec3 orientation{Vec3::UnitZ()};

    static Pose make(const Vec3& position, const Vec3& axis) {
        const double n = axis.norm();
        if (n <= 0.0)
            throw InvalidSpecError("pose axis must be nonzero");
        return Pose{position, axis / n};
    }
};

inline bool pose_orientation_is_unit(const Pose& p, double tol = 1e-9) {
    return std::abs(p.orientation.norm() - 1.0) <= tol;
}

// Electrical coil description entering the coupling coefficient:
// mean turn surface area S, turn count nu, ohmic resistance R.
struct CoilSpec {
    double surface_area = 0.0; // m^2, mean over all turns
    int turns = 1;
    double resistance = 0.0; // Ohm
};

inline void validate_coil(const CoilSpec& c) {
    if (!(c.surface_area > 0.0))
        throw InvalidSpecError("coil surface_area must be > 0");
    if (!(c.resistance > 0.0))
        throw InvalidSpecError("coil resistance must be > 0");
    if (c.turns < 1)
        throw InvalidSpecError("coil turns must be >= 1");
}

// Carrier and medium; wave number and wavelength are derived on construction.
struct Environment {
    double carrier_frequency = 500e3; // Hz
    double permeability = kVacuumPermeability;
    double wave_speed = kSpeedOfLight;

    double wave_number() const { return 2.0 * M_PI * carrier_frequency / wave_speed; }
    double wavelength() const { return wave_speed / carrier_frequency; }
};

// Stationary coil with calibration state. matching_factor (xi) absorbs
// attenuation/phase of imperfect matching, multipath_field (b_NLOS) the
// spatially constant scatter field. Uncalibrated defaults: xi = 1, b = 0.
struct Anchor {
    Pose pose;
    CoilSpec coil;
    Complex matching_factor{1.0, 0.0};
    CVec3 multipath_field{CVec3::Zero()};
};

// |xi| <= 1 holds for physical matching networks; enforced where anchors are
// ingested from configuration. Calibration output is exempt: a fitted xi also
// absorbs aperture mismatch of the dipole model and may exceed unit magnitude
// slightly.
inline void validate_anchor(const Anchor& a, double xi_tol = 1e-12) {
    if (!pose_orientation_is_unit(a.pose))
        throw InvalidSpecError("anchor orientation must be a unit vector");
    validate_coil(a.coil);
    if (std::abs(a.matching_factor) > 1.0 + xi_tol)
        throw InvalidSpecError("anchor |matching_factor| must be <= 1");
}

} // namespace mi

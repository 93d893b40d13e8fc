#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "mi/emsim.hpp"
#include "mi/model.hpp"
#include "oracles.hpp"

using namespace mi;
using namespace mi::emsim;
using doctest::Approx;

namespace {

SpiderwebSpec circle_spec(double diameter, int segments) {
    SpiderwebSpec s;
    s.inner_diameter = diameter;
    s.outer_diameter = diameter;
    s.turns = 1;
    s.segments_per_turn = segments;
    return s;
}

} // namespace

TEST_CASE("spiderweb: single-turn circle circumference") {
    const auto path = build_spiderweb(circle_spec(0.1, 256), Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    CHECK(path.closed);
    CHECK(path_length(path) == Approx(M_PI * 0.1).epsilon(1e-3));
}

TEST_CASE("spiderweb: reference spec mean radius and enclosed area") {
    SpiderwebSpec spec; // 100/130 mm, 10 turns
    spec.segments_per_turn = 256;
    const Vec3 center(0.4, -0.2, 1.1);
    const auto path = build_spiderweb(spec, Pose{center, Vec3(0, 0, 1)});

    double mean_radius = 0.0;
    for (const auto& p : path.points)
        mean_radius += (p - center).norm();
    mean_radius /= static_cast<double>(path.points.size());
    CHECK(mean_radius == Approx(0.0575).epsilon(2e-3));

    // Analytic oracle: ten turns at the mean radius.
    CHECK(enclosed_area(path, center) == Approx(10.0 * M_PI * 0.0575 * 0.0575).epsilon(1e-2));
}

TEST_CASE("spiderweb: rotating the pose is an isometry") {
    SpiderwebSpec spec;
    spec.segments_per_turn = 64;
    spec.include_feed = true;
    spec.feed_length = 0.1;
    const auto base = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto rotated =
        build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(1, 2, -0.5).normalized()});
    REQUIRE(base.points.size() == rotated.points.size());
    for (std::size_t i = 1; i < base.points.size(); ++i) {
        const double d_base = (base.points[i] - base.points[i - 1]).norm();
        const double d_rot = (rotated.points[i] - rotated.points[i - 1]).norm();
        CHECK(std::abs(d_base - d_rot) < 1e-12);
        CHECK(std::abs(base.points[i].norm() - rotated.points[i].norm()) < 1e-12);
    }
}

TEST_CASE("spiderweb: invalid specs rejected") {
    SpiderwebSpec bad;
    bad.inner_diameter = 0.2;
    bad.outer_diameter = 0.1;
    CHECK_THROWS_AS((void)build_spiderweb(bad, Pose{}), InvalidSpecError);
    SpiderwebSpec coarse;
    coarse.segments_per_turn = 8;
    CHECK_THROWS_AS((void)build_spiderweb(coarse, Pose{}), InvalidSpecError);
}

TEST_CASE("mutual inductance: coaxial loops match the elliptic-integral oracle") {
    const double radius = 0.05;
    const auto spec = circle_spec(2.0 * radius, 2048);
    const auto loop_a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    for (const double d : {0.1, 0.5, 2.0}) {
        const auto loop_b = build_spiderweb(spec, Pose{Vec3(0, 0, d), Vec3(0, 0, 1)});
        const double m = mutual_inductance(loop_a, loop_b, kVacuumPermeability);
        const double oracle = oracles::coaxial_loop_mutual(radius, radius, d, kVacuumPermeability);
        CHECK(std::abs(m - oracle) < 1e-4 * std::abs(oracle));
    }
}

TEST_CASE("mutual inductance: perpendicular loops on the axis cancel") {
    const auto spec = circle_spec(0.1, 512);
    const auto loop_a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto loop_b = build_spiderweb(spec, Pose{Vec3(0, 0, 0.5), Vec3(0, 1, 0)});
    const auto loop_c = build_spiderweb(spec, Pose{Vec3(0, 0, 0.5), Vec3(0, 0, 1)});
    const double m_perp = mutual_inductance(loop_a, loop_b, kVacuumPermeability);
    const double m_coax = mutual_inductance(loop_a, loop_c, kVacuumPermeability);
    CHECK(std::abs(m_perp) < 1e-6 * std::abs(m_coax));
}

TEST_CASE("mutual inductance: linear in permeability") {
    const auto spec = circle_spec(0.1, 128);
    const auto a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b = build_spiderweb(spec, Pose{Vec3(0.1, 0, 0.6), Vec3(0, 0, 1)});
    const double m1 = mutual_inductance(a, b, kVacuumPermeability);
    const double m2 = mutual_inductance(a, b, 2.0 * kVacuumPermeability);
    CHECK(m2 == Approx(2.0 * m1).epsilon(1e-15));
}

TEST_CASE("mutual inductance: exact symmetry and serial/parallel identity") {
    SpiderwebSpec spec;
    spec.segments_per_turn = 48;
    const auto a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b = build_spiderweb(spec, Pose{Vec3(0.3, 0.2, 0.9), Vec3(0.5, 0.5, 0.7).normalized()});
    const double m_ab = mutual_inductance(a, b, kVacuumPermeability);
    const double m_ba = mutual_inductance(b, a, kVacuumPermeability);
    CHECK(m_ab == m_ba); // bit-identical under operand swap
    CHECK(m_ab == mutual_inductance_serial(a, b, kVacuumPermeability));
}

TEST_CASE("mutual inductance: refinement convergence below 0.1%") {
    const double radius = 0.05;
    const auto a1 = build_spiderweb(circle_spec(2 * radius, 256), Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b1 = build_spiderweb(circle_spec(2 * radius, 256), Pose{Vec3(0, 0, 0.5), Vec3(0, 0, 1)});
    const auto a2 = build_spiderweb(circle_spec(2 * radius, 512), Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b2 = build_spiderweb(circle_spec(2 * radius, 512), Pose{Vec3(0, 0, 0.5), Vec3(0, 0, 1)});
    const double m1 = mutual_inductance(a1, b1, kVacuumPermeability);
    const double m2 = mutual_inductance(a2, b2, kVacuumPermeability);
    CHECK(std::abs(m2 - m1) < 1e-3 * std::abs(m2));
}

TEST_CASE("mutual inductance: dipole limit for small loops") {
    const double radius = 0.005;
    const double d = 1.0;
    const auto spec = circle_spec(2 * radius, 64);
    const auto a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b = build_spiderweb(spec, Pose{Vec3(0, 0, d), Vec3(0, 0, 1)});
    const double m = mutual_inductance(a, b, kVacuumPermeability);
    const double s = M_PI * radius * radius;
    const double dipole = kVacuumPermeability * s * s / (2.0 * M_PI * d * d * d);
    CHECK(m == Approx(dipole).epsilon(1e-2));
}

TEST_CASE("mutual inductance: proximity guard") {
    const auto spec = circle_spec(0.1, 32); // coarse: segment ~ 9.8 mm
    const auto a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b = build_spiderweb(spec, Pose{Vec3(0, 0, 0.05), Vec3(0, 0, 1)});
    CHECK_THROWS_AS((void)mutual_inductance(a, b, kVacuumPermeability), PathsTooCloseError);
}

TEST_CASE("synthetic channel: dipole-scale loops agree with the quasistatic model") {
    const double radius = 0.005;
    const double resistance = 0.5;
    const auto spec = circle_spec(2 * radius, 128);
    const auto a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b = build_spiderweb(spec, Pose{Vec3(0, 0, 1.0), Vec3(0, 0, 1)});
    const Complex h_sim =
        synthetic_channel(a, b, resistance, resistance, 500e3, kVacuumPermeability);

    CoilSpec coil;
    coil.surface_area = M_PI * radius * radius;
    coil.turns = 1;
    coil.resistance = resistance;
    Anchor anchor;
    anchor.pose = Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)};
    anchor.coil = coil;
    const Complex h_model = model::channel_coefficient_quasistatic(
        anchor, Pose{Vec3(0, 0, 1.0), Vec3(0, 0, 1)}, coil, Environment{});
    CHECK(std::abs(h_sim - h_model) < 5e-3 * std::abs(h_model));
}

TEST_CASE("synthetic channel: zero coupling and resistance scaling") {
    const auto spec = circle_spec(0.1, 256);
    const auto a = build_spiderweb(spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)});
    const auto b_perp = build_spiderweb(spec, Pose{Vec3(0, 0, 0.8), Vec3(0, 1, 0)});
    const auto b_coax = build_spiderweb(spec, Pose{Vec3(0, 0, 0.8), Vec3(0, 0, 1)});

    const Complex h_perp = synthetic_channel(a, b_perp, 0.36, 0.36, 500e3, kVacuumPermeability);
    const Complex h_coax = synthetic_channel(a, b_coax, 0.36, 0.36, 500e3, kVacuumPermeability);
    CHECK(std::abs(h_perp) < 1e-6 * std::abs(h_coax));

    // |h| ~ (Ra Rb)^{-1/2}: quadrupling the product halves the coefficient.
    const Complex h_heavy = synthetic_channel(a, b_coax, 2.0 * 0.36, 2.0 * 0.36, 500e3,
                                              kVacuumPermeability);
    CHECK(std::abs(h_heavy) == Approx(0.5 * std::abs(h_coax)).epsilon(1e-12));
    const Complex h_heavier = synthetic_channel(a, b_coax, 4.0 * 0.36, 4.0 * 0.36, 500e3,
                                                kVacuumPermeability);
    CHECK(std::abs(h_heavier) == Approx(0.25 * std::abs(h_coax)).epsilon(1e-12));
}

TEST_CASE("synthesize dataset: single link equals synthetic_channel") {
    SpiderwebSpec spec;
    spec.segments_per_turn = 32;
    const Pose anchor_pose{Vec3(0, 0, 0), Vec3(0, 0, 1)};
    const Pose agent_pose{Vec3(0.4, 0.2, 1.0), Vec3(1, 0, 0)};
    const std::vector<SimAnchor> anchors = {{spec, anchor_pose, 0.36}};
    const auto data = synthesize_dataset(anchors, {agent_pose}, spec, 0.36, 500e3,
                                         kVacuumPermeability);
    REQUIRE(data.size() == 1);
    REQUIRE(data[0].size() == 1);

    const auto pa = build_spiderweb(spec, anchor_pose);
    const auto pb = build_spiderweb(spec, agent_pose);
    const Complex expected = synthetic_channel(pb, pa, 0.36, 0.36, 500e3, kVacuumPermeability);
    CHECK(data[0](0) == expected);
}

TEST_CASE("synthesize dataset: permutation equivariance over deployments") {
    SpiderwebSpec spec;
    spec.segments_per_turn = 32;
    const std::vector<SimAnchor> anchors = {
        {spec, Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)}, 0.36},
        {spec, Pose{Vec3(3, 0, 2), Vec3(0, 1, 0)}, 0.36},
    };
    const std::vector<Pose> deployments = {
        Pose{Vec3(1.0, 0.5, 1.0), Vec3(0, 0, 1)},
        Pose{Vec3(1.5, 1.0, 0.8), Vec3(1, 0, 0)},
        Pose{Vec3(0.8, 1.2, 1.3), Vec3(0, 1, 0)},
    };
    const std::vector<Pose> permuted = {deployments[2], deployments[0], deployments[1]};
    const auto d1 = synthesize_dataset(anchors, deployments, spec, 0.36, 500e3,
                                       kVacuumPermeability);
    const auto d2 = synthesize_dataset(anchors, permuted, spec, 0.36, 500e3,
                                       kVacuumPermeability);
    CHECK(d1[0] == d2[1]);
    CHECK(d1[1] == d2[2]);
    CHECK(d1[2] == d2[0]);
}

TEST_CASE("wire path CSV round-trip is lossless") {
    SpiderwebSpec spec;
    spec.segments_per_turn = 32;
    spec.include_feed = true;
    spec.feed_length = 0.08;
    const auto path = build_spiderweb(spec, Pose{Vec3(0.123456789, -2.5, 0.77), Vec3(0, 0, 1)});
    std::stringstream ss;
    write_wirepath_csv(path, ss);
    const auto back = read_wirepath_csv(ss);
    REQUIRE(back.points.size() == path.points.size());
    for (std::size_t i = 0; i < path.points.size(); ++i)
        CHECK((back.points[i] - path.points[i]).norm() == 0.0); // %.17g round-trips exactly
}

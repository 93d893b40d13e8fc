#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "mi/io.hpp"
#include "mi/pipeline.hpp"
#include "mi/scenario.hpp"

using namespace mi;
using namespace mi::harness;
using doctest::Approx;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "mi_harness_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("default scenario: layout matches the reference setup") {
    const Scenario sc = default_scenario();
    REQUIRE(sc.anchors.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        const double z = sc.anchors[i].pose.position.z();
        if (i % 2 == 0)
            CHECK(z == Approx(2.0)); // anchors 1,3,5,7 (1-based)
        else
            CHECK(z == Approx(0.68));
        CHECK(sc.anchors[i].pose.orientation.norm() == Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(sc.anchors[i].matching_factor - Complex(1.0, 0.0)) == 0.0);
        CHECK(sc.anchors[i].multipath_field.norm() == 0.0);
    }
    const auto poses = sc.deployment_poses();
    CHECK(poses.size() == 270); // 45 positions x 6 orientations
    CHECK(sc.environment.carrier_frequency == Approx(500e3));
    CHECK(sc.environment.wavelength() == Approx(599.6).epsilon(1e-3));
    CHECK(sc.environment.wave_number() * sc.environment.wavelength() ==
          Approx(2.0 * M_PI).epsilon(1e-12));
}

TEST_CASE("scenario config: overrides and validation") {
    const char* text = R"({
        "environment": {"f_hz": 1e6},
        "coil": {"turns": 5, "resistance": 0.5},
        "grid": {"count": [2, 2, 2]},
        "wls": {"num_initializations": 4},
        "peb": {"case": 5, "params": {"background_psd_dbm_hz": -110.0}},
        "seed": 99
    })";
    const Scenario sc = scenario_from_json_text(text);
    CHECK(sc.environment.carrier_frequency == 1e6);
    CHECK(sc.agent_coil.turns == 5);
    CHECK(sc.agent_coil.resistance == 0.5);
    CHECK(sc.deployment_poses().size() == 8 * 6);
    CHECK(sc.wls.num_initializations == 4);
    CHECK(sc.peb.case_id == 5);
    CHECK(sc.peb.background_psd_dbm_hz == -110.0);
    CHECK(sc.seed == 99);

    CHECK_THROWS_AS((void)scenario_from_json_text("{"), ConfigError);
    CHECK_THROWS_AS((void)scenario_from_json_text(R"({"coil": {"resistance": -1}})"),
                    InvalidSpecError);
    // |xi| <= 1 is enforced for configured anchors via validate_anchor.
    Anchor bad;
    bad.coil = helpers::reference_coil();
    bad.matching_factor = Complex(1.2, 0.0);
    CHECK_THROWS_AS(validate_anchor(bad), InvalidSpecError);
}

TEST_CASE("measurement CSV: lossless round-trip and error reporting") {
    const auto dir = temp_dir();
    const auto path = (dir / "meas.csv").string();

    const Scenario sc = helpers::small_scenario();
    const auto deps = model_measurements(sc, sc.anchors);
    write_measurements_csv(deps, path);
    const auto back = read_measurements_csv(path);
    REQUIRE(back.size() == deps.size());
    for (std::size_t i = 0; i < deps.size(); ++i) {
        CHECK(back[i].index == deps[i].index);
        CHECK((back[i].agent_pose.position - deps[i].agent_pose.position).norm() == 0.0);
        CHECK((back[i].measured - deps[i].measured).norm() == 0.0);
    }

    // Missing column must be named in the error.
    const auto bad_path = (dir / "bad.csv").string();
    std::ofstream bad(bad_path);
    bad << "i,px,py,pz,ox,oy,h1_re,h1_im\n1,0,0,0,0,0,1,2\n";
    bad.close();
    try {
        (void)read_measurements_csv(bad_path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("oz") != std::string::npos);
    }

    const auto short_path = (dir / "short.csv").string();
    std::ofstream sh(short_path);
    sh << "i,px,py,pz,ox,oy,oz,h1_re,h1_im\n1,0,0,0,0,0,1\n";
    sh.close();
    CHECK_THROWS_AS((void)read_measurements_csv(short_path), DimensionMismatchError);
}

TEST_CASE("calibration JSON: round-trip preserves the anchor state") {
    const auto dir = temp_dir();
    const auto path = (dir / "calib.json").string();
    const auto anchors = helpers::decorated_anchors(1234);
    write_calibration_json(anchors, path);
    const auto back = read_calibration_json(default_scenario().anchors, path);
    REQUIRE(back.size() == anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        CHECK(std::abs(back[i].matching_factor - anchors[i].matching_factor) < 1e-15);
        CHECK((back[i].multipath_field - anchors[i].multipath_field).norm() < 1e-15);
        CHECK((back[i].pose.position - anchors[i].pose.position).norm() < 1e-15);
        CHECK((back[i].pose.orientation - anchors[i].pose.orientation).norm() < 1e-12);
    }
}

TEST_CASE("model measurements + localization batch: exact recovery, deterministic") {
    Scenario sc = helpers::small_scenario();
    sc.seed = 4242;
    const auto anchors = helpers::decorated_anchors(50);
    const auto deps = model_measurements(sc, anchors);
    REQUIRE(deps.size() == 2 * 2 * 2 * 6);

    const auto rows = localize_batch(sc, anchors, deps);
    REQUIRE(rows.size() == deps.size());
    for (const auto& r : rows) {
        CHECK(r.converged);
        CHECK(r.position_error < 1e-3);
        CHECK(r.orientation_error < 0.1);
    }

    const auto rows2 = localize_batch(sc, anchors, deps);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].estimate.position == rows2[i].estimate.position);
        CHECK(rows[i].residual == rows2[i].residual);
    }
}

TEST_CASE("results CSV round-trip") {
    const auto dir = temp_dir();
    const auto path = (dir / "results.csv").string();
    std::vector<LocalizationRow> rows(2);
    rows[0].index = 1;
    rows[0].truth = Pose{Vec3(1, 2, 3), Vec3(0, 0, 1)};
    rows[0].estimate = Pose{Vec3(1.01, 2.0, 3.0), Vec3(0, 0, 1)};
    rows[0].position_error = 0.01;
    rows[0].orientation_error = 0.5;
    rows[0].residual = 1e-9;
    rows[0].converged = true;
    rows[1] = rows[0];
    rows[1].index = 3;
    rows[1].converged = false;
    write_results_csv(rows, path);
    const auto back = read_results_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].position_error == rows[0].position_error);
    CHECK(back[1].converged == false);
}

TEST_CASE("pose noise injection is opt-in and degrades the model fit") {
    auto sc = helpers::small_scenario();
    const auto clean = synthesize_measurements(sc);

    sc.noise.position_stddev = 0.01;
    sc.noise.orientation_stddev = 2.0 * M_PI / 180.0;
    const auto noisy = synthesize_measurements(sc);

    REQUIRE(clean.size() == noisy.size());
    // Recorded ground truth stays nominal; only the data changes.
    CHECK((clean[0].agent_pose.position - noisy[0].agent_pose.position).norm() == 0.0);
    CHECK((clean[0].measured - noisy[0].measured).norm() > 0.0);

    const auto fit_clean =
        mi::calib::relative_model_error(clean, sc.anchors, sc.agent_coil, sc.environment);
    const auto fit_noisy =
        mi::calib::relative_model_error(noisy, sc.anchors, sc.agent_coil, sc.environment);
    CHECK(fit_noisy.median > fit_clean.median);
}

TEST_CASE("noise model selection honors the case taxonomy") {
    const Scenario sc = default_scenario();
    CHECK_THROWS_AS((void)noise_model_for_case(sc, sc.anchors, 7, {}), ConfigError);
    CHECK_THROWS_AS((void)noise_model_for_case(sc, sc.anchors, 1, {}), ConfigError);
    const auto thermal = noise_model_for_case(sc, sc.anchors, 6, {});
    CHECK(thermal.label == "case6");
    CHECK(thermal.covariance.rows() == 16);
}

#include <doctest.h>

#include "helpers.hpp"
#include "mi/locate.hpp"
#include "mi/model.hpp"
#include "oracles.hpp"

using namespace mi;
using namespace mi::locate;
using doctest::Approx;

namespace {

// Real stack used by the grid oracle (mirrors the solver's problem setup).
void stack_system(const Eigen::VectorXd& w, const Eigen::Matrix3Xcd& a, const ChannelVector& h,
                  Eigen::MatrixXd& c_mat, Eigen::VectorXd& y) {
    const Eigen::Index n = h.size();
    c_mat.resize(2 * n, 3);
    y.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) {
            c_mat(i, j) = w(i) * a(j, i).real();
            c_mat(n + i, j) = w(i) * a(j, i).imag();
        }
        y(i) = w(i) * h(i).real();
        y(n + i) = w(i) * h(i).imag();
    }
}

} // namespace

TEST_CASE("weight matrix: symmetry, cubic law, spread") {
    const auto coil = helpers::reference_coil();
    const Environment env;

    // Two identical anchors, equidistant agent.
    std::vector<Anchor> pair(2);
    pair[0].pose = Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)};
    pair[1].pose = Pose{Vec3(2, 0, 0), Vec3(0, 0, 1)};
    pair[0].coil = pair[1].coil = coil;
    const Eigen::VectorXd w_eq = weight_matrix(Vec3(1, 0, 0), pair, coil, env);
    CHECK(w_eq(0) == Approx(w_eq(1)).epsilon(1e-14));

    // Doubling the distance multiplies the entry by 8.
    const Eigen::VectorXd w1 = weight_matrix(Vec3(0, 0, 1), {pair[0]}, coil, env);
    const Eigen::VectorXd w2 = weight_matrix(Vec3(0, 0, 2), {pair[0]}, coil, env);
    CHECK(w2(0) == Approx(8.0 * w1(0)).epsilon(1e-12));

    // Reference layout at room center: finite, within 6 orders of magnitude.
    const auto anchors = harness::default_scenario().anchors;
    const Eigen::VectorXd w = weight_matrix(Vec3(1.5, 1.5, 1.0), anchors, coil, env);
    CHECK(w.minCoeff() > 0.0);
    CHECK(w.maxCoeff() / w.minCoeff() < 1e6);
}

TEST_CASE("steering matrix: definitional consistency with the channel vector") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(19);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 p = helpers::random_in_box(rng, Vec3(0.5, 0.5, 0.3), Vec3(2.5, 2.5, 1.7));
        const Vec3 o = helpers::random_unit(rng);
        const Eigen::Matrix3Xcd a = steering_matrix(p, anchors, coil, env);
        const ChannelVector h = model::channel_vector(anchors, Pose{p, o}, coil, env);
        const ChannelVector predicted = a.transpose() * o.cast<Complex>();
        CHECK((predicted - h).norm() <= 1e-12 * h.norm());
    }
}

TEST_CASE("steering matrix: coaxial column parallel to the anchor axis") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    std::vector<Anchor> one(1);
    one[0].pose = Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)};
    one[0].coil = coil;
    const Eigen::Matrix3Xcd a = steering_matrix(Vec3(0, 0, 1.3), one, coil, env);
    CHECK(std::abs(a(0, 0)) == 0.0);
    CHECK(std::abs(a(1, 0)) == 0.0);
    CHECK(std::abs(a(2, 0)) > 0.0);
}

TEST_CASE("steering matrix: finite over a position fuzz sweep") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(23);
    Rng rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec3 p = helpers::random_in_box(rng, Vec3(0.2, 0.2, 0.1), Vec3(2.8, 2.8, 1.9));
        const Eigen::Matrix3Xcd a = steering_matrix(p, anchors, coil, env);
        CHECK(a.allFinite());
    }
}

TEST_CASE("orientation solve: consistent system returns the generator") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(42);
    Rng rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const Vec3 p = helpers::random_in_box(rng, Vec3(0.5, 0.5, 0.3), Vec3(2.5, 2.5, 1.7));
        const Vec3 o_true = helpers::random_unit(rng);
        const Eigen::VectorXd w = weight_matrix(p, anchors, coil, env);
        const Eigen::Matrix3Xcd a = steering_matrix(p, anchors, coil, env);
        const ChannelVector h = a.transpose() * o_true.cast<Complex>();

        const OrientationSolve sol = orientation_solve(w, a, h);
        CHECK((sol.orientation - o_true).norm() < 1e-9);
        CHECK(sol.objective < 1e-15);

        const OrientationSolve neg = orientation_solve(w, a, ChannelVector(-h));
        CHECK((neg.orientation + o_true).norm() < 1e-9);
    }
}

TEST_CASE("orientation solve: matches the sphere-grid oracle") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(77);
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const Vec3 p = helpers::random_in_box(rng, Vec3(0.5, 0.5, 0.3), Vec3(2.5, 2.5, 1.7));
        const Vec3 o_true = helpers::random_unit(rng);
        const Eigen::VectorXd w = weight_matrix(p, anchors, coil, env);
        const Eigen::Matrix3Xcd a = steering_matrix(p, anchors, coil, env);
        ChannelVector h = a.transpose() * o_true.cast<Complex>();
        // Nontrivial residual at the optimum.
        for (Eigen::Index i = 0; i < h.size(); ++i)
            h(i) *= Complex(1.0 + 0.2 * rng.uniform(-1, 1), 0.2 * rng.uniform(-1, 1));

        const OrientationSolve sol = orientation_solve(w, a, h);
        Eigen::MatrixXd c_mat;
        Eigen::VectorXd y;
        stack_system(w, a, h, c_mat, y);
        const double oracle = oracles::sphere_grid_min(c_mat, y);
        CHECK(sol.objective <= oracle * (1.0 + 1e-6) + 1e-18);
    }
}

TEST_CASE("orientation solve: degenerate system flagged") {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
    Eigen::Matrix3Xcd a = Eigen::Matrix3Xcd::Zero(3, 2);
    ChannelVector h = ChannelVector::Zero(2);
    const OrientationSolve sol = orientation_solve(w, a, h);
    CHECK(sol.degenerate);
    CHECK(sol.orientation == Vec3(0, 0, 1));
}

TEST_CASE("wls localize: noiseless consistency at interior deployments") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(101);
    Rng rng(31);
    WlsConfig cfg;
    cfg.rng_seed = 2024;
    int hits = 0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
        const Pose truth{helpers::random_in_box(rng, Vec3(0.6, 0.6, 0.4), Vec3(2.4, 2.4, 1.6)),
                         helpers::random_unit(rng)};
        const ChannelVector h = model::channel_vector(anchors, truth, coil, env);
        const LocationEstimate est = wls_localize(h, anchors, coil, env, cfg);
        if ((est.position - truth.position).norm() < 1e-3 &&
            orientation_error(est.orientation, truth.orientation) < 0.1)
            ++hits;
    }
    CHECK(hits == trials);
}

TEST_CASE("wls localize: translation equivariance") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    auto anchors = helpers::decorated_anchors(7);
    const Pose truth{Vec3(1.2, 1.7, 0.8), Vec3(0.3, -0.5, 0.81).normalized()};
    const ChannelVector h = model::channel_vector(anchors, truth, coil, env);

    WlsConfig cfg;
    cfg.rng_seed = 5;
    const LocationEstimate base = wls_localize(h, anchors, coil, env, cfg);

    const Vec3 t(0.5, -0.25, 1.0);
    auto shifted = anchors;
    for (auto& a : shifted)
        a.pose.position += t;
    const Pose truth_shifted{truth.position + t, truth.orientation};
    const ChannelVector h_shifted = model::channel_vector(shifted, truth_shifted, coil, env);
    CHECK((h_shifted - h).norm() <= 1e-9 * h.norm());

    const LocationEstimate moved = wls_localize(h_shifted, shifted, coil, env, cfg);
    CHECK((moved.position - (base.position + t)).norm() < 1e-6);
    CHECK((moved.orientation - base.orientation).norm() < 1e-8);
}

TEST_CASE("wls localize: invariant to a common complex scale") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    auto anchors = helpers::decorated_anchors(3);
    const Pose truth{Vec3(1.9, 0.8, 1.1), Vec3(0, 1, 0)};
    ChannelVector h = model::channel_vector(anchors, truth, coil, env);
    // Perturb so the optimum has nonzero residual.
    Rng rng(8);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        h(i) *= Complex(1.0 + 0.05 * rng.uniform(-1, 1), 0.05 * rng.uniform(-1, 1));

    WlsConfig cfg;
    cfg.rng_seed = 77;
    const LocationEstimate base = wls_localize(h, anchors, coil, env, cfg);

    const Complex scale = std::polar(0.37, 1.1);
    auto scaled_anchors = anchors;
    for (auto& a : scaled_anchors)
        a.matching_factor *= scale;
    const LocationEstimate scaled =
        wls_localize(ChannelVector(scale * h), scaled_anchors, coil, env, cfg);
    CHECK((scaled.position - base.position).norm() < 1e-9);
    CHECK((scaled.orientation - base.orientation).norm() < 1e-9);
}

TEST_CASE("wls localize: input validation") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors();
    ChannelVector h(3);
    h.setZero();
    CHECK_THROWS_AS((void)wls_localize(h, anchors, coil, env), DimensionMismatchError);
    std::vector<Anchor> two(anchors.begin(), anchors.begin() + 2);
    CHECK_THROWS_AS((void)wls_localize(ChannelVector::Zero(2), two, coil, env),
                    InvalidSpecError);
}

TEST_CASE("wls localize: fewer anchors than unknowns raises the warning flag") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(88);
    const Pose truth{Vec3(1.4, 1.6, 1.1), Vec3(0.8, 0, 0.6)};

    std::vector<Anchor> four(anchors.begin(), anchors.begin() + 4);
    const ChannelVector h4 = model::channel_vector(four, truth, coil, env);
    CHECK(wls_localize(h4, four, coil, env).low_anchor_warning);

    const ChannelVector h8 = model::channel_vector(anchors, truth, coil, env);
    CHECK(!wls_localize(h8, anchors, coil, env).low_anchor_warning);
}

TEST_CASE("baseline 5D solver: stationary at the truth, agrees with WLS") {
    const auto coil = helpers::reference_coil();
    const Environment env;
    const auto anchors = helpers::decorated_anchors(15);
    const Pose truth{Vec3(1.4, 1.1, 0.9), Vec3(0.6, 0.0, 0.8)};
    const ChannelVector h = model::channel_vector(anchors, truth, coil, env);

    const LocationEstimate at_truth =
        baseline_5d_nls(h, anchors, coil, env, truth.position, truth.orientation);
    CHECK((at_truth.position - truth.position).norm() < 1e-9);

    const Vec3 near = truth.position + Vec3(0.05, -0.03, 0.04);
    const LocationEstimate nls =
        baseline_5d_nls(h, anchors, coil, env, near, Vec3(0, 0, 1));
    WlsConfig cfg;
    cfg.rng_seed = 13;
    const LocationEstimate wls = wls_localize(h, anchors, coil, env, cfg);
    if (nls.converged && wls.converged &&
        (nls.position - truth.position).norm() < 1e-3)
        CHECK((nls.position - wls.position).norm() < 1e-3);
}

TEST_CASE("orientation error: degrees between axes") {
    CHECK(orientation_error(Vec3(0, 0, 1), Vec3(0, 0, 1)) == Approx(0.0));
    CHECK(orientation_error(Vec3(0, 0, 1), Vec3(0, 0, -1)) == Approx(180.0));
    CHECK(orientation_error(Vec3(1, 0, 0), Vec3(0, 1, 0)) == Approx(90.0));
}

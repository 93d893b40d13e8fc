#include "mi/calib.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mi/lm.hpp"
#include "mi/model.hpp"
#include "mi/stats.hpp"

namespace mi::calib {

namespace {

// Complex least squares for h_i = gamma0 (u b_LOS,i^T o_i + v^T o_i):
// builds the M x 4 design, solves for w = (u, v). Columns are rescaled to
// unit norm before factorization; their raw magnitudes differ by the size
// of gamma0.
struct EssentialSolve {
    Complex u;
    CVec3 v;
    double mean_sq_residual;
};

EssentialSolve solve_essential(const Anchor& anchor, std::size_t anchor_index,
                               const std::vector<Deployment>& calibration,
                               const CoilSpec& agent_coil, const Environment& env) {
    const auto m = static_cast<Eigen::Index>(calibration.size());
    if (m < 4)
        throw RankDeficientError("essential calibration needs at least 4 deployments");

    const Complex gamma0 = model::coupling_coefficient(agent_coil, anchor.coil, env, {1.0, 0.0});

    Eigen::MatrixXcd design(m, 4);
    Eigen::VectorXcd target(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Deployment& dep = calibration[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(anchor_index) >= dep.measured.size())
            throw DimensionMismatchError("deployment measurement shorter than anchor index");
        const auto geom = model::link_geometry(anchor.pose, dep.agent_pose.position);
        const CVec3 b_los = model::direct_path_field(geom, env.wave_number());
        const Vec3& o = dep.agent_pose.orientation;
        design(i, 0) = gamma0 * (b_los(0) * o(0) + b_los(1) * o(1) + b_los(2) * o(2));
        design(i, 1) = gamma0 * o(0);
        design(i, 2) = gamma0 * o(1);
        design(i, 3) = gamma0 * o(2);
        target(i) = dep.measured(static_cast<Eigen::Index>(anchor_index));
    }

    Eigen::Vector4d col_scale;
    for (int c = 0; c < 4; ++c) {
        col_scale(c) = design.col(c).norm();
        if (col_scale(c) > 0.0)
            design.col(c) /= col_scale(c);
    }
    if ((col_scale.array() <= 0.0).any())
        throw RankDeficientError("essential calibration design has a zero column");

    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(design,
                                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double rank_tol = 1e-10 * svd.singularValues()(0);
    if (svd.singularValues()(3) <= rank_tol)
        throw RankDeficientError("deployment poses cannot separate xi and b_NLOS (rank < 4)");

    const Eigen::Vector4cd w_scaled = svd.solve(target);
    Eigen::Vector4cd w = w_scaled.array() / col_scale.array().cast<Complex>();

    EssentialSolve out;
    out.u = w(0);
    out.v = CVec3(w(1), w(2), w(3));
    out.mean_sq_residual =
        (design * w_scaled - target).squaredNorm() / static_cast<double>(m);
    return out;
}

std::pair<double, double> anchor_angles(const Anchor& a) {
    return model::unit_to_spherical(a.pose.orientation);
}

} // namespace

DataSplit split_odd_even(const std::vector<Deployment>& deployments) {
    if (deployments.size() < 2)
        throw TooFewDeploymentsError("odd/even split needs at least 2 deployments");
    DataSplit split;
    for (const auto& d : deployments) {
        if (d.index % 2 == 0)
            split.calibration.push_back(d);
        else
            split.evaluation.push_back(d);
    }
    if (split.calibration.empty() || split.evaluation.empty())
        throw TooFewDeploymentsError("odd/even split produced an empty subset");
    return split;
}

EssentialResult essential_calibrate(const Anchor& anchor, std::size_t anchor_index,
                                    const std::vector<Deployment>& calibration,
                                    const CoilSpec& agent_coil, const Environment& env) {
    const EssentialSolve s =
        solve_essential(anchor, anchor_index, calibration, agent_coil, env);
    if (std::abs(s.u) < 1e-6)
        throw NearZeroXiError("fitted |xi| < 1e-6, b_NLOS recovery unstable");
    EssentialResult out;
    out.xi = s.u;
    out.b_nlos = s.v / s.u;
    out.mean_sq_residual = s.mean_sq_residual;
    return out;
}

std::vector<Anchor> essential_calibrate_all(const std::vector<Anchor>& anchors,
                                            const std::vector<Deployment>& calibration,
                                            const CoilSpec& agent_coil, const Environment& env) {
    std::vector<Anchor> out = anchors;
    std::vector<std::string> failures(anchors.size());
    const auto n = static_cast<std::ptrdiff_t>(anchors.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ai = static_cast<std::size_t>(i);
        try {
            const EssentialResult r =
                essential_calibrate(anchors[ai], ai, calibration, agent_coil, env);
            out[ai].matching_factor = r.xi;
            out[ai].multipath_field = r.b_nlos;
        } catch (const Error& e) {
            failures[ai] = e.what();
        }
    }
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) {
            std::ostringstream oss;
            oss << "anchor " << i << ": " << failures[i];
            throw RankDeficientError(oss.str());
        }
    }
    return out;
}

FullResult full_calibrate_anchor(const Anchor& nominal, std::size_t anchor_index,
                                 const std::vector<Deployment>& calibration,
                                 const PosePrior& prior, const CoilSpec& agent_coil,
                                 const Environment& env, const FullCalibrationOptions& options) {
    if (!(prior.position_stddev > 0.0) || !(prior.angle_stddev > 0.0))
        throw InvalidSpecError("prior stddevs must be > 0");

    const auto [az0, pol0] = anchor_angles(nominal);
    const EssentialSolve nominal_fit =
        solve_essential(nominal, anchor_index, calibration, agent_coil, env);
    // Likelihood scale; guarded so that noiseless self-consistent data does
    // not produce a zero weight.
    const double sigma_sq = std::max(nominal_fit.mean_sq_residual, 1e-30);
    const double inv_sigma = 1.0 / std::sqrt(sigma_sq);

    const auto m = static_cast<Eigen::Index>(calibration.size());
    const Eigen::Index n_res = 2 * m + 5;

    const auto pose_at = [&](const Eigen::VectorXd& x) {
        Anchor a = nominal;
        a.pose.position = Vec3(x(0), x(1), x(2));
        a.pose.orientation = model::spherical_to_unit(x(3), x(4));
        return a;
    };

    const auto residual = [&](const Eigen::VectorXd& x) {
        const Anchor a = pose_at(x);
        const EssentialSolve fit =
            solve_essential(a, anchor_index, calibration, agent_coil, env);
        const Complex gamma0 =
            model::coupling_coefficient(agent_coil, a.coil, env, {1.0, 0.0});
        Eigen::VectorXd r(n_res);
        for (Eigen::Index i = 0; i < m; ++i) {
            const Deployment& dep = calibration[static_cast<std::size_t>(i)];
            const auto geom = model::link_geometry(a.pose, dep.agent_pose.position);
            const CVec3 b_los = model::direct_path_field(geom, env.wave_number());
            const Vec3& o = dep.agent_pose.orientation;
            const Complex pred =
                gamma0 * (fit.u * (b_los(0) * o(0) + b_los(1) * o(1) + b_los(2) * o(2)) +
                          fit.v(0) * o(0) + fit.v(1) * o(1) + fit.v(2) * o(2));
            const Complex eps = dep.measured(static_cast<Eigen::Index>(anchor_index)) - pred;
            r(2 * i) = inv_sigma * eps.real();
            r(2 * i + 1) = inv_sigma * eps.imag();
        }
        r(2 * m + 0) = (x(0) - prior.position_mean(0)) / prior.position_stddev;
        r(2 * m + 1) = (x(1) - prior.position_mean(1)) / prior.position_stddev;
        r(2 * m + 2) = (x(2) - prior.position_mean(2)) / prior.position_stddev;
        r(2 * m + 3) = (x(3) - az0) / prior.angle_stddev;
        r(2 * m + 4) = (x(4) - pol0) / prior.angle_stddev;
        return r;
    };

    const auto jacobian = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd jac(n_res, 5);
        for (int c = 0; c < 5; ++c) {
            const double step = 1e-7 * std::max(1.0, std::abs(x(c)));
            Eigen::VectorXd xp = x, xm = x;
            xp(c) += step;
            xm(c) -= step;
            jac.col(c) = (residual(xp) - residual(xm)) / (2.0 * step);
        }
        return jac;
    };

    Eigen::VectorXd x0(5);
    x0 << nominal.pose.position(0), nominal.pose.position(1), nominal.pose.position(2), az0, pol0;

    detail::LmOptions lm_opts;
    lm_opts.max_iterations = options.lm_max_iterations;
    lm_opts.initial_damping = options.lm_initial_damping;
    lm_opts.step_tolerance = options.step_tolerance;
    const detail::LmResult lm = detail::levenberg_marquardt(x0, residual, jacobian, lm_opts);

    FullResult out;
    out.anchor = pose_at(lm.x);
    const EssentialSolve final_fit =
        solve_essential(out.anchor, anchor_index, calibration, agent_coil, env);
    if (std::abs(final_fit.u) < 1e-6)
        throw NearZeroXiError("fitted |xi| < 1e-6 after pose refinement");
    out.anchor.matching_factor = final_fit.u;
    out.anchor.multipath_field = final_fit.v / final_fit.u;
    out.converged = lm.converged;
    out.map_objective = lm.objective;

    const double pos_dev = (lm.x.head<3>() - prior.position_mean).cwiseAbs().maxCoeff() /
                           prior.position_stddev;
    const double ang_dev = std::max(std::abs(lm.x(3) - az0), std::abs(lm.x(4) - pol0)) /
                           prior.angle_stddev;
    out.prior_violation = std::max(pos_dev, ang_dev) > options.prior_violation_sigmas;
    return out;
}

std::vector<FullResult> full_calibrate(const std::vector<Anchor>& anchors,
                                       const std::vector<Deployment>& calibration,
                                       const std::vector<PosePrior>& priors,
                                       const CoilSpec& agent_coil, const Environment& env,
                                       const FullCalibrationOptions& options) {
    if (priors.size() != anchors.size())
        throw DimensionMismatchError("one prior per anchor required");
    std::vector<FullResult> out(anchors.size());
    std::vector<std::string> failures(anchors.size());
    const auto n = static_cast<std::ptrdiff_t>(anchors.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ai = static_cast<std::size_t>(i);
        try {
            out[ai] = full_calibrate_anchor(anchors[ai], ai, calibration, priors[ai],
                                            agent_coil, env, options);
        } catch (const Error& e) {
            failures[ai] = e.what();
        }
    }
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) {
            std::ostringstream oss;
            oss << "anchor " << i << ": " << failures[i];
            throw RankDeficientError(oss.str());
        }
    }
    return out;
}

ModelErrorStats relative_model_error(const std::vector<Deployment>& evaluation,
                                     const std::vector<Anchor>& anchors,
                                     const CoilSpec& agent_coil, const Environment& env,
                                     double magnitude_guard) {
    ModelErrorStats out;
    out.values.reserve(evaluation.size() * anchors.size());
    for (const auto& dep : evaluation) {
        if (dep.measured.size() != static_cast<Eigen::Index>(anchors.size()))
            throw DimensionMismatchError("measurement length != anchor count");
        const ChannelVector h_model =
            model::channel_vector(anchors, dep.agent_pose, agent_coil, env);
        for (Eigen::Index n = 0; n < h_model.size(); ++n) {
            const double mag = std::abs(dep.measured(n));
            if (mag < magnitude_guard) {
                ++out.excluded;
                continue;
            }
            out.values.push_back(std::abs(dep.measured(n) - h_model(n)) / mag);
            out.links.emplace_back(dep.index, static_cast<int>(n) + 1);
        }
    }
    if (!out.values.empty()) {
        out.median = stats::quantile_type7(out.values, 0.5);
        out.percentile90 = stats::quantile_type7(out.values, 0.9);
    }
    return out;
}

} // namespace mi::calib

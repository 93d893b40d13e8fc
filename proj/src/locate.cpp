#include "mi/locate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mi/lm.hpp"
#include "mi/model.hpp"
#include "mi/rng.hpp"

namespace mi::locate {

namespace {

double coupling_magnitude(const Anchor& anchor, const CoilSpec& agent_coil,
                          const Environment& env) {
    const double g =
        std::abs(model::coupling_coefficient(agent_coil, anchor.coil, env,
                                             anchor.matching_factor));
    if (!(g > 0.0))
        throw InvalidSpecError("anchor coupling coefficient has zero magnitude (xi = 0?)");
    return g;
}

// Real stack of the weighted system: C = [Re(W A^T); Im(W A^T)] (2N x 3),
// y = [Re(W h); Im(W h)].
void stack_weighted(const Eigen::VectorXd& weights, const Eigen::Matrix3Xcd& steering,
                    const ChannelVector& h_meas, Eigen::MatrixXd& c_mat, Eigen::VectorXd& y) {
    const Eigen::Index n = h_meas.size();
    c_mat.resize(2 * n, 3);
    y.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = weights(i);
        for (int j = 0; j < 3; ++j) {
            c_mat(i, j) = w * steering(j, i).real();
            c_mat(n + i, j) = w * steering(j, i).imag();
        }
        y(i) = w * h_meas(i).real();
        y(n + i) = w * h_meas(i).imag();
    }
}

// Secular equation phi(lambda) = sum beta_j^2/(mu_j + lambda)^2 = 1 solved on
// (-mu_min, inf) with the classic 1/sqrt(phi) Newton iteration; handles the
// degenerate direction ("hard") case explicitly.
Vec3 norm_constrained_solve(const Eigen::Matrix3d& b_mat, const Vec3& b_vec) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(b_mat);
    const Vec3 mu = eig.eigenvalues(); // ascending
    const Eigen::Matrix3d q = eig.eigenvectors();
    const Vec3 beta = q.transpose() * b_vec;

    const double scale = std::max({std::abs(mu(0)), std::abs(mu(2)), 1e-300});
    const double gap_tol = 1e-12 * scale;
    const double beta_tol = 1e-14 * std::max(beta.norm(), 1e-300);

    // Contribution of non-degenerate directions at lambda = -mu_min.
    double s2 = 0.0;
    bool degenerate_beta_zero = true;
    for (int j = 0; j < 3; ++j) {
        const double gap = mu(j) - mu(0);
        if (gap > gap_tol)
            s2 += beta(j) * beta(j) / (gap * gap);
        else if (std::abs(beta(j)) > beta_tol)
            degenerate_beta_zero = false;
    }

    if (degenerate_beta_zero && s2 <= 1.0) {
        // Hard case: lambda = -mu_min, leftover norm along the bottom
        // eigenvector (positive sign by convention).
        Vec3 w = Vec3::Zero();
        for (int j = 0; j < 3; ++j) {
            const double gap = mu(j) - mu(0);
            if (gap > gap_tol)
                w(j) = beta(j) / gap;
        }
        w(0) += std::sqrt(std::max(0.0, 1.0 - s2));
        w.normalize();
        return q * w;
    }

    const auto phi = [&](double lambda) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double den = mu(j) + lambda;
            acc += beta(j) * beta(j) / (den * den);
        }
        return acc;
    };
    const auto phi_deriv = [&](double lambda) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double den = mu(j) + lambda;
            acc += -2.0 * beta(j) * beta(j) / (den * den * den);
        }
        return acc;
    };

    // Bracket the root: phi decreases monotonically on (-mu_min, inf).
    double lo = -mu(0) + 1e-14 * std::max(1.0, scale);
    for (int it = 0; it < 200 && phi(lo) < 1.0; ++it)
        lo = -mu(0) + 0.5 * (lo + mu(0)); // halve the offset toward -mu_min
    double hi = std::max(1.0, -mu(0) + scale) + beta.norm();
    for (int it = 0; it < 200 && phi(hi) >= 1.0; ++it)
        hi = 2.0 * hi + 1.0;

    double lambda = std::clamp(-mu(0) + beta.norm(), lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double p = phi(lambda);
        if (p >= 1.0)
            lo = lambda;
        else
            hi = lambda;
        // Newton on 1/sqrt(phi) - 1, which is nearly linear in lambda.
        const double f = 1.0 / std::sqrt(p) - 1.0;
        const double fp = -0.5 * phi_deriv(lambda) / (p * std::sqrt(p));
        double next = lambda - f / fp;
        if (!std::isfinite(next) || next <= lo || next >= hi)
            next = 0.5 * (lo + hi);
        if (std::abs(next - lambda) <= 1e-15 * std::max(1.0, std::abs(lambda))) {
            lambda = next;
            break;
        }
        lambda = next;
    }

    Vec3 w;
    for (int j = 0; j < 3; ++j)
        w(j) = beta(j) / (mu(j) + lambda);
    w.normalize();
    return q * w;
}

struct WlsObjective {
    Vec3 orientation;
    double objective; // squared weighted norm
    bool degenerate;
};

WlsObjective evaluate_wls(const Vec3& position, const ChannelVector& h_meas,
                          const std::vector<Anchor>& anchors, const CoilSpec& agent_coil,
                          const Environment& env) {
    const Eigen::VectorXd w = weight_matrix(position, anchors, agent_coil, env);
    const Eigen::Matrix3Xcd a = steering_matrix(position, anchors, agent_coil, env);
    const OrientationSolve sol = orientation_solve(w, a, h_meas);
    return {sol.orientation, sol.objective, sol.degenerate};
}

// Joint 5-parameter refinement of the weighted objective from a WLS iterate.
// The position-step Jacobian with the orientation held fixed is only the
// partial derivative of the profiled objective, which makes the terminal
// convergence of the position LM linear; the joint system has an exact
// analytic Jacobian and restores quadratic convergence near the optimum.
detail::LmResult polish_joint(const Vec3& position, const Vec3& orientation,
                              const ChannelVector& h_meas, const std::vector<Anchor>& anchors,
                              const CoilSpec& agent_coil, const Environment& env,
                              const detail::LmOptions& lm_opts) {
    const Eigen::Index n = h_meas.size();

    const auto residual = [&](const Eigen::VectorXd& x) {
        const Vec3 p(x(0), x(1), x(2));
        const Vec3 o = model::spherical_to_unit(x(3), x(4));
        const Eigen::VectorXd w = weight_matrix(p, anchors, agent_coil, env);
        const Eigen::Matrix3Xcd a = steering_matrix(p, anchors, agent_coil, env);
        Eigen::VectorXd r(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Complex pred(0.0, 0.0);
            for (int j = 0; j < 3; ++j)
                pred += a(j, i) * o(j);
            const Complex e = w(i) * (h_meas(i) - pred);
            r(i) = e.real();
            r(n + i) = e.imag();
        }
        return r;
    };

    const auto jacobian = [&](const Eigen::VectorXd& x) {
        const Vec3 p(x(0), x(1), x(2));
        const double st = std::sin(x(4)), ct = std::cos(x(4));
        const double sa = std::sin(x(3)), ca = std::cos(x(3));
        const Vec3 o(st * ca, st * sa, ct);
        const Vec3 do_daz(-st * sa, st * ca, 0.0);
        const Vec3 do_dpol(ct * ca, ct * sa, -st);

        Eigen::MatrixXd jac(2 * n, 5);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& anchor = anchors[static_cast<std::size_t>(i)];
            const auto sd = model::steering_derivative(anchor, p, agent_coil, env);
            const double inv_gamma = 1.0 / coupling_magnitude(anchor, agent_coil, env);
            const double w_i = sd.distance * sd.distance * sd.distance * inv_gamma;
            const Eigen::RowVector3d dw_dp =
                3.0 * sd.distance * sd.distance * inv_gamma * sd.direction.transpose();
            Complex pred(0.0, 0.0), pred_az(0.0, 0.0), pred_pol(0.0, 0.0);
            for (int j = 0; j < 3; ++j) {
                pred += sd.column(j) * o(j);
                pred_az += sd.column(j) * do_daz(j);
                pred_pol += sd.column(j) * do_dpol(j);
            }
            const Complex mismatch = h_meas(i) - pred;
            const Eigen::RowVector3cd dpred =
                o.cast<Complex>().transpose() * sd.dcolumn_dposition;
            const Eigen::RowVector3cd dpos = dw_dp.cast<Complex>() * mismatch - w_i * dpred;
            for (int j = 0; j < 3; ++j) {
                jac(i, j) = dpos(j).real();
                jac(n + i, j) = dpos(j).imag();
            }
            jac(i, 3) = (-w_i * pred_az).real();
            jac(n + i, 3) = (-w_i * pred_az).imag();
            jac(i, 4) = (-w_i * pred_pol).real();
            jac(n + i, 4) = (-w_i * pred_pol).imag();
        }
        return jac;
    };

    const auto [az, pol] = model::unit_to_spherical(orientation);
    Eigen::VectorXd x0(5);
    x0 << position(0), position(1), position(2), az, pol;
    return detail::levenberg_marquardt(x0, residual, jacobian, lm_opts);
}

} // namespace

Eigen::VectorXd weight_matrix(const Vec3& agent_position, const std::vector<Anchor>& anchors,
                              const CoilSpec& agent_coil, const Environment& env, double d_min) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(anchors.size()));
    for (std::size_t n = 0; n < anchors.size(); ++n) {
        const auto geom = model::link_geometry(anchors[n].pose, agent_position, d_min);
        const double d = geom.distance;
        w(static_cast<Eigen::Index>(n)) =
            d * d * d / coupling_magnitude(anchors[n], agent_coil, env);
    }
    return w;
}

Eigen::Matrix3Xcd steering_matrix(const Vec3& agent_position, const std::vector<Anchor>& anchors,
                                  const CoilSpec& agent_coil, const Environment& env,
                                  double d_min) {
    Eigen::Matrix3Xcd a(3, static_cast<Eigen::Index>(anchors.size()));
    for (std::size_t n = 0; n < anchors.size(); ++n) {
        const auto geom = model::link_geometry(anchors[n].pose, agent_position, d_min);
        const CVec3 b_los = model::direct_path_field(geom, env.wave_number());
        const Complex gamma = model::coupling_coefficient(agent_coil, anchors[n].coil, env,
                                                          anchors[n].matching_factor);
        a.col(static_cast<Eigen::Index>(n)) = gamma * (b_los + anchors[n].multipath_field);
    }
    return a;
}

OrientationSolve orientation_solve(const Eigen::VectorXd& weights,
                                   const Eigen::Matrix3Xcd& steering,
                                   const ChannelVector& h_meas) {
    if ((weights.array() <= 0.0).any())
        throw InvalidSpecError("orientation_solve requires strictly positive weights");
    Eigen::MatrixXd c_mat;
    Eigen::VectorXd y;
    stack_weighted(weights, steering, h_meas, c_mat, y);

    OrientationSolve out;
    if (c_mat.norm() == 0.0) {
        out.orientation = Vec3::UnitZ();
        out.objective = y.squaredNorm();
        out.degenerate = true;
        return out;
    }

    const Eigen::Matrix3d b_mat = c_mat.transpose() * c_mat;
    const Vec3 b_vec = c_mat.transpose() * y;
    out.orientation = norm_constrained_solve(b_mat, b_vec);
    out.objective = (c_mat * out.orientation - y).squaredNorm();
    return out;
}

LocationEstimate wls_localize(const ChannelVector& h_meas, const std::vector<Anchor>& anchors,
                              const CoilSpec& agent_coil, const Environment& env,
                              const WlsConfig& config) {
    const auto n = static_cast<Eigen::Index>(anchors.size());
    if (h_meas.size() != n)
        throw DimensionMismatchError("measurement length != anchor count");
    if (n < 3)
        throw InvalidSpecError("wls_localize needs at least 3 anchors");
    if (config.num_initializations < 1)
        throw InvalidSpecError("num_initializations must be >= 1");

    Vec3 lower = config.init_lower, upper = config.init_upper;
    if (!config.has_init_box()) {
        lower = Vec3::Constant(std::numeric_limits<double>::infinity());
        upper = -lower;
        for (const auto& a : anchors) {
            lower = lower.cwiseMin(a.pose.position);
            upper = upper.cwiseMax(a.pose.position);
        }
        const Vec3 margin = 0.1 * (upper - lower).cwiseMax(Vec3::Constant(0.1));
        lower -= margin;
        upper += margin;
    }

    detail::LmOptions lm_opts;
    lm_opts.max_iterations = config.lm_max_iterations;
    lm_opts.initial_damping = config.lm_initial_damping;
    lm_opts.step_tolerance = config.step_tolerance;
    lm_opts.residual_tolerance = config.residual_tolerance;

    // Residual and Jacobian of the position objective with the orientation
    // estimate held fixed per iterate (it is recomputed inside `residual`
    // through evaluate_wls; the Jacobian uses the variable-projection form).
    const auto make_residual = [&](const Vec3& position, Vec3& orientation_out) {
        const WlsObjective obj = evaluate_wls(position, h_meas, anchors, agent_coil, env);
        orientation_out = obj.orientation;
        Eigen::VectorXd r(2 * n);
        const Eigen::VectorXd w = weight_matrix(position, anchors, agent_coil, env);
        const Eigen::Matrix3Xcd a = steering_matrix(position, anchors, agent_coil, env);
        for (Eigen::Index i = 0; i < n; ++i) {
            Complex pred(0.0, 0.0);
            for (int j = 0; j < 3; ++j)
                pred += a(j, i) * obj.orientation(j);
            const Complex e = w(i) * (h_meas(i) - pred);
            r(i) = e.real();
            r(n + i) = e.imag();
        }
        return r;
    };

    LocationEstimate best;
    double best_objective = std::numeric_limits<double>::infinity();
    Rng rng(config.rng_seed);

    // Candidate starts: the random draws plus a coarse lattice over the box,
    // ranked by the profiled objective (cheap closed form per position). The
    // LM descents start from the best-ranked, mutually separated candidates;
    // the number of descents stays num_initializations.
    std::vector<std::pair<double, Vec3>> candidates;
    for (int init = 0; init < config.num_initializations; ++init) {
        Vec3 p0;
        for (int c = 0; c < 3; ++c)
            p0(c) = rng.uniform(lower(c), upper(c));
        candidates.emplace_back(
            config.lattice_preselect
                ? evaluate_wls(p0, h_meas, anchors, agent_coil, env).objective
                : 0.0,
            p0);
    }
    constexpr int kLattice[3] = {6, 6, 5};
    for (int ix = 0; config.lattice_preselect && ix < kLattice[0]; ++ix) {
        for (int iy = 0; iy < kLattice[1]; ++iy) {
            for (int iz = 0; iz < kLattice[2]; ++iz) {
                const Vec3 p0(
                    lower(0) + (upper(0) - lower(0)) * (ix + 0.5) / kLattice[0],
                    lower(1) + (upper(1) - lower(1)) * (iy + 0.5) / kLattice[1],
                    lower(2) + (upper(2) - lower(2)) * (iz + 0.5) / kLattice[2]);
                candidates.emplace_back(
                    evaluate_wls(p0, h_meas, anchors, agent_coil, env).objective, p0);
            }
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<Vec3> starts;
    std::vector<bool> taken(candidates.size(), false);
    const double min_separation = 0.15 * (upper - lower).norm();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (static_cast<int>(starts.size()) >= config.num_initializations)
            break;
        bool distinct = true;
        for (const auto& s : starts)
            distinct = distinct && (s - candidates[c].second).norm() > min_separation;
        if (distinct) {
            starts.push_back(candidates[c].second);
            taken[c] = true;
        }
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) { // fill up if separation ran dry
        if (static_cast<int>(starts.size()) >= config.num_initializations)
            break;
        if (!taken[c])
            starts.push_back(candidates[c].second);
    }

    for (int init = 0; init < static_cast<int>(starts.size()); ++init) {
        const Vec3 p0 = starts[static_cast<std::size_t>(init)];

        Vec3 orientation = Vec3::UnitZ();
        const auto residual = [&](const Eigen::VectorXd& x) {
            return make_residual(Vec3(x(0), x(1), x(2)), orientation);
        };
        const auto jacobian = [&](const Eigen::VectorXd& x) {
            const Vec3 p(x(0), x(1), x(2));
            const WlsObjective obj = evaluate_wls(p, h_meas, anchors, agent_coil, env);
            Eigen::MatrixXd jac(2 * n, 3);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& anchor = anchors[static_cast<std::size_t>(i)];
                const auto sd = model::steering_derivative(anchor, p, agent_coil, env);
                const double inv_gamma = 1.0 / coupling_magnitude(anchor, agent_coil, env);
                const double w_i = sd.distance * sd.distance * sd.distance * inv_gamma;
                const Eigen::RowVector3d dw_dp =
                    3.0 * sd.distance * sd.distance * inv_gamma * sd.direction.transpose();
                Complex pred(0.0, 0.0);
                for (int j = 0; j < 3; ++j)
                    pred += sd.column(j) * obj.orientation(j);
                const Complex mismatch = h_meas(i) - pred;
                const Eigen::RowVector3cd dpred =
                    obj.orientation.cast<Complex>().transpose() * sd.dcolumn_dposition;
                const Eigen::RowVector3cd drow =
                    dw_dp.cast<Complex>() * mismatch - w_i * dpred;
                jac.row(i) = drow.real();
                jac.row(n + i) = drow.imag();
            }
            return jac;
        };

        Eigen::VectorXd x0(3);
        x0 << p0(0), p0(1), p0(2);
        const detail::LmResult lm = detail::levenberg_marquardt(x0, residual, jacobian, lm_opts);

        Vec3 p_hat(lm.x(0), lm.x(1), lm.x(2));
        WlsObjective obj = evaluate_wls(p_hat, h_meas, anchors, agent_coil, env);
        bool converged = lm.converged;
        if (!obj.degenerate) {
            const detail::LmResult joint = polish_joint(p_hat, obj.orientation, h_meas, anchors,
                                                        agent_coil, env, lm_opts);
            const Vec3 p_joint(joint.x(0), joint.x(1), joint.x(2));
            const WlsObjective refined = evaluate_wls(p_joint, h_meas, anchors, agent_coil, env);
            if (refined.objective <= obj.objective) {
                p_hat = p_joint;
                obj = refined;
                converged = converged || joint.converged;
            }
        }
        if (obj.objective < best_objective) {
            best_objective = obj.objective;
            best.position = p_hat;
            best.orientation = obj.orientation;
            best.weighted_residual = std::sqrt(obj.objective);
            best.converged = converged;
            best.initialization_index = init;
        }
    }
    best.low_anchor_warning = n < 5;
    return best;
}

LocationEstimate baseline_5d_nls(const ChannelVector& h_meas, const std::vector<Anchor>& anchors,
                                 const CoilSpec& agent_coil, const Environment& env,
                                 const Vec3& init_position, const Vec3& init_orientation,
                                 int lm_max_iterations) {
    const auto n = static_cast<Eigen::Index>(anchors.size());
    if (h_meas.size() != n)
        throw DimensionMismatchError("measurement length != anchor count");

    const auto residual = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto cd = model::channel_derivative(anchors[static_cast<std::size_t>(i)],
                                                      Vec3(x(0), x(1), x(2)), x(3), x(4),
                                                      agent_coil, env);
            const Complex e = h_meas(i) - cd.value;
            r(i) = e.real();
            r(n + i) = e.imag();
        }
        return r;
    };
    const auto jacobian = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd jac(2 * n, 5);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto cd = model::channel_derivative(anchors[static_cast<std::size_t>(i)],
                                                      Vec3(x(0), x(1), x(2)), x(3), x(4),
                                                      agent_coil, env);
            for (int j = 0; j < 3; ++j) {
                jac(i, j) = -cd.dposition(j).real();
                jac(n + i, j) = -cd.dposition(j).imag();
            }
            jac(i, 3) = -cd.dazimuth.real();
            jac(n + i, 3) = -cd.dazimuth.imag();
            jac(i, 4) = -cd.dpolar.real();
            jac(n + i, 4) = -cd.dpolar.imag();
        }
        return jac;
    };

    const auto [az0, pol0] = model::unit_to_spherical(init_orientation.normalized());
    Eigen::VectorXd x0(5);
    x0 << init_position(0), init_position(1), init_position(2), az0, pol0;

    detail::LmOptions lm_opts;
    lm_opts.max_iterations = lm_max_iterations;
    const detail::LmResult lm = detail::levenberg_marquardt(x0, residual, jacobian, lm_opts);

    LocationEstimate out;
    out.position = Vec3(lm.x(0), lm.x(1), lm.x(2));
    out.orientation = model::spherical_to_unit(lm.x(3), lm.x(4));
    out.weighted_residual = std::sqrt(lm.objective);
    out.converged = lm.converged;
    out.low_anchor_warning = n < 5;
    return out;
}

double orientation_error(const Vec3& estimated, const Vec3& truth) {
    const double c = std::clamp(estimated.normalized().dot(truth.normalized()), -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

} // namespace mi::locate

#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mi::detail {

struct LmOptions {
    int max_iterations = 100;
    double initial_damping = 1e-3;
    double step_tolerance = 1e-6;
    double residual_tolerance = 1e-12;
    double max_damping = 1e12;
};

struct LmResult {
    Eigen::VectorXd x;
    double objective = 0.0; // squared residual norm at x
    bool converged = false;
    int iterations = 0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Dense Levenberg-Marquardt with multiplicative damping: x10 on rejected
// steps, x0.1 on accepted ones. The objective is non-increasing over
// accepted steps by construction.
inline LmResult levenberg_marquardt(Eigen::VectorXd x0, const ResidualFn& residual,
                                    const JacobianFn& jacobian, const LmOptions& opts = {}) {
    LmResult best;
    best.x = std::move(x0);
    Eigen::VectorXd r = residual(best.x);
    best.objective = r.squaredNorm();

    double damping = opts.initial_damping;
    const auto dim = best.x.size();

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        best.iterations = iter + 1;
        if (best.objective < opts.residual_tolerance) {
            best.converged = true;
            break;
        }
        const Eigen::MatrixXd jac = jacobian(best.x);
        const Eigen::MatrixXd normal = jac.transpose() * jac;
        const Eigen::VectorXd gradient = jac.transpose() * r;

        bool accepted = false;
        while (damping <= opts.max_damping) {
            const Eigen::VectorXd step =
                (normal + damping * Eigen::MatrixXd::Identity(dim, dim))
                    .ldlt()
                    .solve(-gradient);
            const Eigen::VectorXd x_trial = best.x + step;
            const Eigen::VectorXd r_trial = residual(x_trial);
            const double obj_trial = r_trial.squaredNorm();
            if (std::isfinite(obj_trial) && obj_trial < best.objective) {
                best.x = x_trial;
                r = r_trial;
                best.objective = obj_trial;
                damping *= 0.1;
                accepted = true;
                if (step.norm() < opts.step_tolerance)
                    best.converged = true;
                break;
            }
            damping *= 10.0;
        }
        if (!accepted || best.converged)
            break;
    }
    if (best.objective < opts.residual_tolerance)
        best.converged = true;
    return best;
}

} // namespace mi::detail

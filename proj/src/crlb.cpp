#include "mi/crlb.hpp"

#include <cmath>
#include <limits>

#include "mi/model.hpp"

namespace mi::crlb {

namespace {

constexpr double kPoleTolerance = 1e-9;
constexpr double kSingularRelTolerance = 1e-12;

Eigen::MatrixXd jacobian_columns(const EstimationParameter& eta,
                                 const std::vector<Anchor>& anchors,
                                 const CoilSpec& agent_coil, const Environment& env,
                                 double d_min, bool include_azimuth) {
    const auto n = static_cast<Eigen::Index>(anchors.size());
    const Eigen::Index cols = include_azimuth ? 5 : 4;
    Eigen::MatrixXd jac(2 * n, cols);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto cd =
            model::channel_derivative(anchors[static_cast<std::size_t>(i)], eta.position,
                                      eta.azimuth, eta.polar, agent_coil, env, d_min);
        for (int j = 0; j < 3; ++j) {
            jac(i, j) = cd.dposition(j).real();
            jac(n + i, j) = cd.dposition(j).imag();
        }
        Eigen::Index c = 3;
        if (include_azimuth) {
            jac(i, c) = cd.dazimuth.real();
            jac(n + i, c) = cd.dazimuth.imag();
            ++c;
        }
        jac(i, c) = cd.dpolar.real();
        jac(n + i, c) = cd.dpolar.imag();
    }
    return jac;
}

Eigen::MatrixXd fim_from_jacobian(const Eigen::MatrixXd& jac, const NoiseModel& noise) {
    if (noise.covariance.rows() != jac.rows() || noise.covariance.cols() != jac.rows())
        throw DimensionMismatchError("covariance size does not match 2N");
    const Eigen::LLT<Eigen::MatrixXd> llt(noise.covariance);
    if (llt.info() != Eigen::Success)
        throw SingularCovarianceError("covariance is not positive definite");
    // X = L^{-1} D, FIM = X^T X
    const Eigen::MatrixXd x = llt.matrixL().solve(jac);
    return x.transpose() * x;
}

double db_to_linear_power(double dbm) { return std::pow(10.0, dbm / 10.0); }

} // namespace

Eigen::MatrixXd model_jacobian(const EstimationParameter& eta, const std::vector<Anchor>& anchors,
                               const CoilSpec& agent_coil, const Environment& env, double d_min) {
    if (anchors.empty())
        throw InvalidSpecError("model_jacobian needs at least one anchor");
    return jacobian_columns(eta, anchors, agent_coil, env, d_min, true);
}

Eigen::MatrixXd fisher_information(const EstimationParameter& eta,
                                   const std::vector<Anchor>& anchors,
                                   const CoilSpec& agent_coil, const Environment& env,
                                   const NoiseModel& noise) {
    return fim_from_jacobian(model_jacobian(eta, anchors, agent_coil, env), noise);
}

PebResult position_error_bound(const EstimationParameter& eta,
                               const std::vector<Anchor>& anchors, const CoilSpec& agent_coil,
                               const Environment& env, const NoiseModel& noise) {
    PebResult out;
    out.pole = std::abs(std::sin(eta.polar)) < kPoleTolerance;
    const Eigen::MatrixXd jac =
        jacobian_columns(eta, anchors, agent_coil, env, kDefaultMinDistance, !out.pole);
    const Eigen::MatrixXd fim = fim_from_jacobian(jac, noise);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fim);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double lam_max = lam.maxCoeff();
    if (!(lam_max > 0.0) || lam.minCoeff() <= kSingularRelTolerance * lam_max) {
        out.singular = true;
        out.peb = std::numeric_limits<double>::infinity();
        return out;
    }
    // trace of the position block of FIM^{-1}
    double acc = 0.0;
    for (Eigen::Index k = 0; k < lam.size(); ++k)
        acc += eig.eigenvectors().col(k).head<3>().squaredNorm() / lam(k);
    out.peb = std::sqrt(acc);
    return out;
}

NoiseModel cov_empirical(const std::vector<ChannelVector>& residuals, const std::string& label) {
    if (residuals.size() < 2)
        throw InvalidSpecError("cov_empirical needs at least 2 samples");
    const Eigen::Index n = residuals.front().size();
    const auto m = static_cast<Eigen::Index>(residuals.size());

    Eigen::MatrixXd stacked(2 * n, m);
    for (Eigen::Index s = 0; s < m; ++s) {
        const ChannelVector& r = residuals[static_cast<std::size_t>(s)];
        if (r.size() != n)
            throw DimensionMismatchError("residual vectors have inconsistent length");
        stacked.col(s).head(n) = r.real();
        stacked.col(s).tail(n) = r.imag();
    }
    const Eigen::VectorXd mean = stacked.rowwise().mean();
    stacked.colwise() -= mean;

    NoiseModel out;
    out.label = label;
    out.covariance = stacked * stacked.transpose() / static_cast<double>(m - 1);
    if (m < 2 * n + 1) {
        const double lambda = 1e-12 * out.covariance.trace() / static_cast<double>(2 * n);
        out.covariance += lambda * Eigen::MatrixXd::Identity(2 * n, 2 * n);
        out.regularized = true;
    }
    return out;
}

NoiseModel cov_thermal_independent(std::size_t anchor_count, double n0_dbm_hz,
                                   double bandwidth_hz, double probe_dbm) {
    if (anchor_count == 0)
        throw InvalidSpecError("cov_thermal_independent needs at least one anchor");
    if (!(bandwidth_hz > 0.0))
        throw InvalidSpecError("bandwidth must be > 0");
    const double sigma_sq = db_to_linear_power(n0_dbm_hz - probe_dbm) * bandwidth_hz;
    const auto dim = static_cast<Eigen::Index>(2 * anchor_count);
    NoiseModel out;
    out.label = "thermal";
    out.covariance = 0.5 * sigma_sq * Eigen::MatrixXd::Identity(dim, dim);
    return out;
}

double spherical_bessel_j0(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4)
        return 1.0 - x * x / 6.0; // series, next term O(x^4)
    return std::sin(x) / x;
}

NoiseModel cov_background_correlated(const std::vector<Anchor>& anchors, const Environment& env,
                                     double background_psd_dbm_hz, double bandwidth_hz,
                                     double probe_dbm, double n0_dbm_hz,
                                     const CorrelationKernel& kernel) {
    if (anchors.empty())
        throw InvalidSpecError("cov_background_correlated needs at least one anchor");
    if (!(bandwidth_hz > 0.0))
        throw InvalidSpecError("bandwidth must be > 0");
    const auto n = static_cast<Eigen::Index>(anchors.size());
    const double k = env.wave_number();
    const double sigma_bg_sq = db_to_linear_power(background_psd_dbm_hz - probe_dbm) * bandwidth_hz;
    const double sigma_th_sq = db_to_linear_power(n0_dbm_hz - probe_dbm) * bandwidth_hz;

    Eigen::MatrixXd corr(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index q = 0; q <= m; ++q) {
            const auto& am = anchors[static_cast<std::size_t>(m)];
            const auto& aq = anchors[static_cast<std::size_t>(q)];
            const double d = (am.pose.position - aq.pose.position).norm();
            const double rho = kernel(k * d) * am.pose.orientation.dot(aq.pose.orientation);
            corr(m, q) = rho;
            corr(q, m) = rho;
        }
    }

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    cov.topLeftCorner(n, n) = 0.5 * sigma_bg_sq * corr;
    cov.bottomRightCorner(n, n) = 0.5 * sigma_bg_sq * corr;
    cov += 0.5 * sigma_th_sq * Eigen::MatrixXd::Identity(2 * n, 2 * n);
    cov = 0.5 * (cov + cov.transpose()).eval();

    // Clip tiny negative eigenvalues; reject if the violation is material.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const double lam_max = eig.eigenvalues().maxCoeff();
    const double lam_min = eig.eigenvalues().minCoeff();
    if (lam_min < -1e-8 * lam_max)
        throw NotPsdError("background correlation model is not PSD");
    if (lam_min < 0.0) {
        const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
        cov = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    }

    NoiseModel out;
    out.label = "background+thermal";
    out.covariance = cov;
    return out;
}

} // namespace mi::crlb

#include "ddpmot/gaussian.hpp"

#include "ddpmot/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace ddpmot {

GaussianSpec::GaussianSpec(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
    const auto d = mean_.size();
    if (d == 0) throw InvalidInput("GaussianSpec: empty mean");
    if (cov_.rows() != d || cov_.cols() != d) throw InvalidInput("GaussianSpec: covariance shape mismatch");
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov_.cwiseAbs().maxCoeff())) {
        throw InvalidInput("GaussianSpec: covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
    lambda_ = eig.eigenvalues();
    basis_ = eig.eigenvectors();
    if (lambda_.minCoeff() <= 0.0) throw InvalidInput("GaussianSpec: covariance is not positive definite");
    precision_ = spectral([](double l) { return 1.0 / l; });
    log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + lambda_.array().log().sum());
}

double GaussianSpec::pdf(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd r = x - mean_;
    return std::exp(log_norm_ - 0.5 * r.dot(precision_ * r));
}

GaussianMoments moments_at(const GaussianSpec& spec, double t) {
    if (t < 0.0) throw InvalidInput("moments_at: t must be nonnegative");
    const auto d = static_cast<Eigen::Index>(spec.dim());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    return {std::exp(-t) * spec.mean(), eye + std::exp(-2.0 * t) * (spec.covariance() - eye)};
}

double f_lambda(double lambda, double t) {
    if (!(lambda > 0.0)) throw InvalidInput("f_lambda: lambda must be positive");
    if (t < 0.0) throw InvalidInput("f_lambda: t must be nonnegative");
    return std::sqrt((std::exp(-2.0 * t) * (lambda - 1.0) + 1.0) / lambda);
}

double g_lambda(double lambda, double t) {
    if (!(lambda > 0.0)) throw InvalidInput("g_lambda: lambda must be positive");
    if (t < 0.0) throw InvalidInput("g_lambda: t must be nonnegative");
    if (t == 0.0) return 0.0;
    auto integrand = [lambda](double s) {
        const double base = std::exp(-2.0 * s) * (lambda - 1.0) + 1.0;
        return std::exp(-s) / (base * std::sqrt(base));
    };
    double error = 0.0;
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, t, 20, 1e-14, &error);
    return -std::sqrt(lambda) * f_lambda(lambda, t) * integral;
}

Eigen::VectorXd encoder_map(const GaussianSpec& spec, const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != spec.dim()) throw InvalidInput("encoder_map: dimension mismatch");
    return spec.spectral([](double l) { return 1.0 / std::sqrt(l); }) * (x - spec.mean());
}

Eigen::VectorXd finite_time_map(const GaussianSpec& spec, const Eigen::VectorXd& x, double t) {
    if (static_cast<std::size_t>(x.size()) != spec.dim()) throw InvalidInput("finite_time_map: dimension mismatch");
    const Eigen::MatrixXd homogeneous = spec.spectral([t](double l) { return f_lambda(l, t); });
    const Eigen::MatrixXd particular = spec.spectral([t](double l) { return g_lambda(l, t); });
    return homogeneous * x + particular * spec.mean();
}

double gaussian_ot_cost(const GaussianSpec& spec) {
    const auto& l = spec.eigenvalues();
    return spec.mean().squaredNorm() + l.sum() + static_cast<double>(spec.dim()) - 2.0 * l.array().sqrt().sum();
}

}  // namespace ddpmot

#pragma once

#include <Eigen/Dense>

namespace ddpmot {

/// N(a(0), Sigma(0)) with a cached symmetric eigendecomposition
/// Sigma(0) = V diag(lambda) V^T.
class GaussianSpec {
public:
    GaussianSpec(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::VectorXd& eigenvalues() const { return lambda_; }
    const Eigen::MatrixXd& eigenvectors() const { return basis_; }

    /// V diag(fn(lambda_i)) V^T.
    template <typename Fn>
    Eigen::MatrixXd spectral(Fn&& fn) const {
        Eigen::VectorXd v(lambda_.size());
        for (Eigen::Index i = 0; i < lambda_.size(); ++i) v(i) = fn(lambda_(i));
        return basis_ * v.asDiagonal() * basis_.transpose();
    }

    double pdf(const Eigen::VectorXd& x) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd basis_;
    Eigen::MatrixXd precision_;
    double log_norm_ = 0.0;
};

struct GaussianMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// a(t) = e^{-t} a(0), Sigma(t) = I + e^{-2t} (Sigma(0) - I).
GaussianMoments moments_at(const GaussianSpec& spec, double t);

/// Homogeneous flow factor sqrt((e^{-2t}(lambda - 1) + 1) / lambda).
double f_lambda(double lambda, double t);

/// Inhomogeneous flow factor
///   -sqrt(lambda) f(lambda, t) int_0^t e^{-s} / (e^{-2s}(lambda - 1) + 1)^{3/2} ds,
/// integrated by adaptive Gauss-Kronrod quadrature.
double g_lambda(double lambda, double t);

/// Limiting encoder Sigma(0)^{-1/2} (x - a(0)).
Eigen::VectorXd encoder_map(const GaussianSpec& spec, const Eigen::VectorXd& x);

/// Exact probability-flow state at time t started from x.
Eigen::VectorXd finite_time_map(const GaussianSpec& spec, const Eigen::VectorXd& x, double t);

/// W2^2(N(a, Sigma), N(0, I)) = |a|^2 + tr Sigma + d - 2 tr Sigma^{1/2}.
double gaussian_ot_cost(const GaussianSpec& spec);

}  // namespace ddpmot

#pragma once

#include "ddpmot/cheb.hpp"
#include "ddpmot/gaussian.hpp"
#include "ddpmot/tt.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ddpmot {

using DensityFunction = std::function<double(std::span<const double>)>;

/// exp(-q1(x) - q2(x)) / Z with q1 = (x-a1)^T Q1 (x-a1) and
/// q2 = ((x-a2)^2)^T Q2 (x-a2)^2, the squares taken elementwise.
struct QuarticComponent {
    Eigen::VectorXd a1, a2;
    Eigen::MatrixXd Q1, Q2;
    double Z = 1.0;

    double exponent(std::span<const double> x) const;
    double operator()(std::span<const double> x) const;
};

/// Random law for the mixture parameters: a ~ U[-mean_range, mean_range]^d,
/// Q = q_scale A A^T + q_shift I with A_ij ~ U(-1, 1), and Q2 further scaled by q2_factor.
struct MixtureLaw {
    double mean_range = 2.0;
    double q_scale = 0.5;
    double q_shift = 0.3;
    double q2_factor = 0.05;
};

struct MixtureSpec {
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::vector<QuarticComponent> components;

    std::size_t K() const { return components.size(); }
    /// Equal-weight mixture of the unit-mass components.
    double operator()(std::span<const double> x) const;
};

/// Draws K uniformly from 1..5 and the component parameters from `law`.
/// Each Z is computed by tensor-product Clenshaw-Curtis quadrature over `box`.
MixtureSpec gen_quartic_mixture(std::size_t d, std::uint64_t seed, const MixtureLaw& law = {},
                                std::pair<double, double> box = {-8.0, 8.0});

/// Normalized q(x) * N(0, I) density on the grid, q a rank-2 TT with positive
/// cores. Core entries start as U(0, 1) draws per node and are then averaged
/// along the mode with a Gaussian kernel of width `smoothing` (0 keeps the raw draws).
TTTensor gen_tt_random(std::size_t d, std::uint64_t seed, const ChebGrid& grid, double smoothing = 1.0);

/// Random Gaussian: mean ~ U[-1, 1]^d, eigenvalues ~ U[0.5, 1.5], and for
/// d <= 3 a random rotation (diagonal otherwise).
GaussianSpec gen_gaussian(std::size_t d, std::uint64_t seed);

struct CertifyOptions {
    double boundary_ratio = 1e-12;
    double rescale = 1.25;
    std::size_t max_rescales = 10;
    double cross_tol = 1e-8;
    std::size_t cross_max_rank = 30;
    double round_tol = 1e-12;
};

struct CertifiedDensity {
    TTTensor tensor;
    /// The stored density is x -> p(c + scale (x - c)) / mass, c the box center.
    double scale = 1.0;
    std::size_t rescales = 0;
    double boundary_ratio = 0.0;
    double mass = 1.0;
    double cross_error = 0.0;
    bool cross_rank_capped = false;
};

/// Largest boundary-face node value over the largest node value.
double boundary_ratio(const TTTensor& p);

/// TT-cross of the callable on the grid nodes, rescaled until its exact values
/// on the boundary faces are below the certificate ratio, then normalized.
CertifiedDensity normalize_and_certify(const DensityFunction& f, const ChebGrid& grid, const CertifyOptions& options = {});
/// A grid tensor says nothing about the density outside the box, so it is
/// only normalized; failing the certificate throws NumericalError.
CertifiedDensity normalize_and_certify(const TTTensor& p, const ChebGrid& grid, const CertifyOptions& options = {});
/// Exact node values of the Gaussian, rescaled in closed form.
CertifiedDensity normalize_and_certify(const GaussianSpec& spec, const ChebGrid& grid, const CertifyOptions& options = {});

/// The Gaussian seen through a certificate rescale x -> c + scale (x - c):
/// N(c + (mean - c)/scale, cov/scale^2).
GaussianSpec rescaled(const GaussianSpec& spec, double scale, double center = 0.0);

/// Node values of the Gaussian pdf as a TT: exact rank one for a diagonal
/// covariance, TT-SVD of the dense grid when it fits in memory, TT-cross otherwise.
TTTensor gaussian_tensor(const GaussianSpec& spec, const ChebGrid& grid);

void to_json(nlohmann::json& j, const QuarticComponent& c);
void to_json(nlohmann::json& j, const MixtureSpec& m);
void from_json(const nlohmann::json& j, MixtureSpec& m);

}  // namespace ddpmot

#pragma once

#include "ddpmot/tt.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace ddpmot {

/// Chebyshev-Gauss-Lobatto points cos(pi k / (n-1)) mapped to [a, b], ascending.
std::vector<double> cheb_nodes(std::size_t n, double a, double b);

/// Collocation differentiation matrix on the mapped Lobatto nodes. Order 2 is
/// formed as D1 * D1.
Eigen::MatrixXd cheb_diff(std::size_t n, double a, double b, int order);

/// Clenshaw-Curtis weights on the mapped Lobatto nodes.
std::vector<double> cc_weights(std::size_t n, double a, double b);

/// Tensor-product Chebyshev grid with the same n nodes and interval in every mode.
class ChebGrid {
public:
    ChebGrid(std::size_t d, std::size_t n, double a, double b);

    std::size_t dim() const { return d_; }
    std::size_t size() const { return n_; }
    double lower() const { return a_; }
    double upper() const { return b_; }
    const std::vector<double>& nodes() const { return nodes_; }
    double node(std::size_t i) const { return nodes_[i]; }
    const Eigen::MatrixXd& d1() const { return d1_; }
    const Eigen::MatrixXd& d2() const { return d2_; }
    const std::vector<double>& weights() const { return weights_; }
    /// The Clenshaw-Curtis vector repeated once per mode, ready for tt_integrate.
    const std::vector<std::vector<double>>& quadrature() const { return quadrature_; }
    std::vector<std::size_t> mode_sizes() const { return std::vector<std::size_t>(d_, n_); }

    bool contains(double x) const;
    bool contains(std::span<const double> x) const;
    /// Clamp a coordinate into [a, b].
    double clamp(double x) const;

    /// Lagrange basis values l_j(x) in barycentric (second) form; a unit
    /// vector when x coincides with a node.
    std::vector<double> basis(double x) const;
    /// l_j'(x), so that p'(x) = sum_j l_j'(x) p_j for the interpolant p.
    std::vector<double> basis_derivative(double x) const;

    /// Row i holds basis(points[i]); rows for points outside [a, b] are zero.
    Eigen::MatrixXd interpolation_matrix(std::span<const double> points) const;
    /// interpolation_matrix at factor * node(i): the grid function x -> p(factor x),
    /// taken as zero where factor * x leaves the box.
    Eigen::MatrixXd dilation_matrix(double factor) const;

private:
    std::size_t d_;
    std::size_t n_;
    double a_;
    double b_;
    std::vector<double> nodes_;
    std::vector<double> bary_;
    Eigen::MatrixXd d1_;
    Eigen::MatrixXd d2_;
    std::vector<double> weights_;
    std::vector<std::vector<double>> quadrature_;
};

/// Tensor-product polynomial interpolant of t at x; throws DomainError outside the box.
double interp_eval(const TTTensor& t, const ChebGrid& grid, std::span<const double> x);

/// Gradient of the interpolant at x.
std::vector<double> interp_grad(const TTTensor& t, const ChebGrid& grid, std::span<const double> x);

struct ValueAndGradient {
    double value = 0.0;
    std::vector<double> gradient;
};
/// Value and gradient sharing one pass of per-mode contractions.
ValueAndGradient interp_value_and_grad(const TTTensor& t, const ChebGrid& grid, std::span<const double> x);

/// Grid samples of a function of the point coordinates, as a dense tensor.
DenseTensor sample_on_grid(const ChebGrid& grid, const std::function<double(std::span<const double>)>& f);

}  // namespace ddpmot

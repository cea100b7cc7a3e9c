#include "ddpmot/cheb.hpp"

#include "ddpmot/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ddpmot {

namespace {

void check_interval(std::size_t n, double a, double b) {
    if (n < 2) throw InvalidInput("Chebyshev grid needs at least 2 nodes");
    if (!(a < b)) throw InvalidInput("Chebyshev grid needs a < b");
}

// Barycentric weights of the Lobatto points: (-1)^j, halved at both ends.
std::vector<double> lobatto_bary_weights(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = (j % 2 == 0 ? 1.0 : -1.0) * ((j == 0 || j + 1 == n) ? 0.5 : 1.0);
    return w;
}

}  // namespace

std::vector<double> cheb_nodes(std::size_t n, double a, double b) {
    check_interval(n, a, b);
    const std::size_t m = n - 1;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        // sin form keeps the reference nodes exactly antisymmetric.
        const double ref = std::sin(std::numbers::pi * (2.0 * static_cast<double>(k) - static_cast<double>(m)) /
                                    (2.0 * static_cast<double>(m)));
        x[k] = mid + half * ref;
    }
    x.front() = a;
    x.back() = b;
    return x;
}

Eigen::MatrixXd cheb_diff(std::size_t n, double a, double b, int order) {
    if (order != 1 && order != 2) throw InvalidInput("cheb_diff: order must be 1 or 2");
    const auto x = cheb_nodes(n, a, b);
    const auto w = lobatto_bary_weights(n);
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v = (w[j] / w[i]) / (x[i] - x[j]);
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            diag -= v;
        }
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag;
    }
    if (order == 2) return d * d;
    return d;
}

std::vector<double> cc_weights(std::size_t n, double a, double b) {
    check_interval(n, a, b);
    const std::size_t m = n - 1;
    const double md = static_cast<double>(m);
    std::vector<double> w(n, 0.0);
    if (m == 1) {
        w[0] = w[1] = 1.0;
    } else {
        std::vector<double> v(m - 1, 1.0);
        auto theta = [&](std::size_t k) { return std::numbers::pi * static_cast<double>(k) / md; };
        if (m % 2 == 0) {
            w[0] = w[m] = 1.0 / (md * md - 1.0);
            for (std::size_t k = 1; k < m / 2; ++k) {
                const double kk = static_cast<double>(k);
                for (std::size_t i = 1; i < m; ++i) v[i - 1] -= 2.0 * std::cos(2.0 * kk * theta(i)) / (4.0 * kk * kk - 1.0);
            }
            for (std::size_t i = 1; i < m; ++i) v[i - 1] -= std::cos(md * theta(i)) / (md * md - 1.0);
        } else {
            w[0] = w[m] = 1.0 / (md * md);
            for (std::size_t k = 1; k <= (m - 1) / 2; ++k) {
                const double kk = static_cast<double>(k);
                for (std::size_t i = 1; i < m; ++i) v[i - 1] -= 2.0 * std::cos(2.0 * kk * theta(i)) / (4.0 * kk * kk - 1.0);
            }
        }
        for (std::size_t i = 1; i < m; ++i) w[i] = 2.0 * v[i - 1] / md;
    }
    const double half = 0.5 * (b - a);
    for (auto& wi : w) wi *= half;
    return w;
}

ChebGrid::ChebGrid(std::size_t d, std::size_t n, double a, double b)
    : d_(d), n_(n), a_(a), b_(b), nodes_(cheb_nodes(n, a, b)), bary_(lobatto_bary_weights(n)),
      d1_(cheb_diff(n, a, b, 1)), d2_(d1_ * d1_), weights_(cc_weights(n, a, b)), quadrature_(d, weights_) {
    if (d == 0) throw InvalidInput("ChebGrid: dimension must be positive");
}

bool ChebGrid::contains(double x) const {
    const double slack = 1e-12 * (b_ - a_);
    return x >= a_ - slack && x <= b_ + slack;
}

bool ChebGrid::contains(std::span<const double> x) const {
    return std::all_of(x.begin(), x.end(), [&](double v) { return contains(v); });
}

double ChebGrid::clamp(double x) const { return std::clamp(x, a_, b_); }

std::vector<double> ChebGrid::basis(double x) const {
    std::vector<double> l(n_, 0.0);
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
        const double diff = x - nodes_[j];
        if (diff == 0.0) {
            std::fill(l.begin(), l.end(), 0.0);
            l[j] = 1.0;
            return l;
        }
        l[j] = bary_[j] / diff;
        s += l[j];
    }
    for (auto& v : l) v /= s;
    return l;
}

std::vector<double> ChebGrid::basis_derivative(double x) const {
    double nearest = INFINITY;
    for (double xj : nodes_) nearest = std::min(nearest, std::abs(x - xj));
    if (nearest < 1e-10 * (b_ - a_)) {
        // At (or numerically at) a node: l'(x) = D1^T l(x).
        const auto l = basis(x);
        Eigen::Map<const Eigen::VectorXd> lv(l.data(), static_cast<Eigen::Index>(n_));
        Eigen::VectorXd dl = d1_.transpose() * lv;
        return {dl.data(), dl.data() + dl.size()};
    }
    std::vector<double> u(n_), inv(n_);
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
        inv[j] = 1.0 / (x - nodes_[j]);
        u[j] = bary_[j] * inv[j];
        s += u[j];
    }
    double c_sum = 0.0;
    std::vector<double> c(n_);
    for (std::size_t j = 0; j < n_; ++j) {
        c[j] = u[j] * inv[j] / s;
        c_sum += c[j];
    }
    std::vector<double> dl(n_);
    for (std::size_t j = 0; j < n_; ++j) dl[j] = (u[j] / s) * c_sum - c[j];
    return dl;
}

Eigen::MatrixXd ChebGrid::interpolation_matrix(std::span<const double> points) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!contains(points[i])) continue;
        const auto l = basis(clamp(points[i]));
        for (std::size_t j = 0; j < n_; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = l[j];
    }
    return m;
}

Eigen::MatrixXd ChebGrid::dilation_matrix(double factor) const {
    std::vector<double> pts(n_);
    for (std::size_t i = 0; i < n_; ++i) pts[i] = factor * nodes_[i];
    return interpolation_matrix(pts);
}

namespace {

void check_point(const TTTensor& t, const ChebGrid& grid, std::span<const double> x) {
    if (x.size() != t.dim() || t.dim() != grid.dim()) throw InvalidInput("interpolation: dimension mismatch");
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!grid.contains(x[k])) {
            throw DomainError("interpolation: coordinate " + std::to_string(k) + " = " + std::to_string(x[k]) +
                              " lies outside the grid box");
        }
    }
}

}  // namespace

double interp_eval(const TTTensor& t, const ChebGrid& grid, std::span<const double> x) {
    check_point(t, grid, x);
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < t.dim(); ++k) {
        const auto l = grid.basis(grid.clamp(x[k]));
        v = v * t.core(k).contract(l);
    }
    return v(0);
}

ValueAndGradient interp_value_and_grad(const TTTensor& t, const ChebGrid& grid, std::span<const double> x) {
    check_point(t, grid, x);
    const std::size_t d = t.dim();
    std::vector<RowMatrix> val(d), der(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double xk = grid.clamp(x[k]);
        val[k] = t.core(k).contract(grid.basis(xk));
        der[k] = t.core(k).contract(grid.basis_derivative(xk));
    }
    // prefix[k] = val[0] ... val[k-1] (row vector), suffix[k] = val[k+1] ... val[d-1] (column vector).
    std::vector<Eigen::RowVectorXd> prefix(d + 1);
    prefix[0] = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < d; ++k) prefix[k + 1] = prefix[k] * val[k];
    std::vector<Eigen::VectorXd> suffix(d + 1);
    suffix[d] = Eigen::VectorXd::Ones(1);
    for (std::size_t k = d; k-- > 0;) suffix[k] = val[k] * suffix[k + 1];

    ValueAndGradient out;
    out.value = prefix[d](0);
    out.gradient.resize(d);
    for (std::size_t k = 0; k < d; ++k) out.gradient[k] = (prefix[k] * der[k] * suffix[k + 1])(0);
    return out;
}

std::vector<double> interp_grad(const TTTensor& t, const ChebGrid& grid, std::span<const double> x) {
    return interp_value_and_grad(t, grid, x).gradient;
}

DenseTensor sample_on_grid(const ChebGrid& grid, const std::function<double(std::span<const double>)>& f) {
    const std::size_t d = grid.dim(), n = grid.size();
    DenseTensor out(grid.mode_sizes());
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d, grid.node(0));
    for (std::size_t flat = 0; flat < out.values.size(); ++flat) {
        out.values[flat] = f(x);
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < n) {
                x[k] = grid.node(idx[k]);
                break;
            }
            idx[k] = 0;
            x[k] = grid.node(0);
        }
    }
    return out;
}

}  // namespace ddpmot

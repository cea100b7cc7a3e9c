#pragma once
// Dense reference implementations and random instances shared by the tests.

#include "ddpmot/rng.hpp"
#include "ddpmot/tt.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace testing {

using ddpmot::DenseTensor;
using ddpmot::Rng;
using ddpmot::TTCore;
using ddpmot::TTTensor;

inline std::size_t volume(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// Calls fn(idx) for every multi-index, last index fastest.
template <typename Fn>
void for_each_index(const std::vector<std::size_t>& shape, Fn&& fn) {
    std::vector<std::size_t> idx(shape.size(), 0);
    for (std::size_t flat = 0, n = volume(shape); flat < n; ++flat) {
        fn(idx);
        for (std::size_t k = shape.size(); k-- > 0;) {
            if (++idx[k] < shape[k]) break;
            idx[k] = 0;
        }
    }
}

inline DenseTensor random_dense(const std::vector<std::size_t>& shape, Rng& rng) {
    DenseTensor t(shape);
    for (auto& v : t.values) v = rng.uniform(-1.0, 1.0);
    return t;
}

inline TTTensor random_tt(const std::vector<std::size_t>& shape, std::size_t rank, Rng& rng) {
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        const std::size_t l = k == 0 ? 1 : rank, r = k + 1 == shape.size() ? 1 : rank;
        TTCore c(l, shape[k], r);
        for (auto& v : c.values) v = rng.uniform(-1.0, 1.0);
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

// Entry by explicit chain of vector-matrix products, independent of the library.
inline double chain_entry(const TTTensor& t, const std::vector<std::size_t>& idx) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < t.dim(); ++k) {
        const TTCore& c = t.core(k);
        Eigen::MatrixXd s(c.left, c.right);
        for (std::size_t a = 0; a < c.left; ++a)
            for (std::size_t b = 0; b < c.right; ++b) s(a, b) = c(a, idx[k], b);
        v = v * s;
    }
    return v(0);
}

inline DenseTensor dense_of(const TTTensor& t) {
    DenseTensor out(t.mode_sizes());
    std::size_t flat = 0;
    for_each_index(out.shape, [&](const std::vector<std::size_t>& idx) { out.values[flat++] = chain_entry(t, idx); });
    return out;
}

inline double frob(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) num += (got[i] - want[i]) * (got[i] - want[i]);
    const double den = frob(want);
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num) / den;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Dense mode-k product: out[.., i, ..] = sum_j m(i, j) t[.., j, ..].
inline DenseTensor dense_mode_apply(const DenseTensor& t, const Eigen::MatrixXd& m, std::size_t k) {
    DenseTensor out(t.shape);
    for_each_index(t.shape, [&](const std::vector<std::size_t>& idx) {
        auto src = idx;
        double s = 0.0;
        for (std::size_t j = 0; j < t.shape[k]; ++j) {
            src[k] = j;
            s += m(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(j)) * t[src];
        }
        out[idx] = s;
    });
    return out;
}

inline double dense_weighted_sum(const DenseTensor& t, const std::vector<std::vector<double>>& w) {
    double s = 0.0;
    for_each_index(t.shape, [&](const std::vector<std::size_t>& idx) {
        double p = t[idx];
        for (std::size_t k = 0; k < idx.size(); ++k) p *= w[k][idx[k]];
        s += p;
    });
    return s;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Box-Muller standard normal draw.
inline double normal(Rng& rng) {
    const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace testing

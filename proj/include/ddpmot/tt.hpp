#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace ddpmot {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MultiIndex = std::vector<std::size_t>;

/// One three-index TT-core of shape (left, size, right), stored row-major so
/// that element (a, i, b) sits at (a * size + i) * right + b.
struct TTCore {
    std::size_t left = 1;
    std::size_t size = 0;
    std::size_t right = 1;
    std::vector<double> values;

    TTCore() = default;
    TTCore(std::size_t left, std::size_t size, std::size_t right);
    TTCore(std::size_t left, std::size_t size, std::size_t right, std::vector<double> values);

    double operator()(std::size_t a, std::size_t i, std::size_t b) const {
        return values[(a * size + i) * right + b];
    }
    double& operator()(std::size_t a, std::size_t i, std::size_t b) {
        return values[(a * size + i) * right + b];
    }

    /// (left * size) x right view, rows indexed by (a, i).
    Eigen::Map<const RowMatrix> left_unfolding() const {
        return {values.data(), static_cast<Eigen::Index>(left * size), static_cast<Eigen::Index>(right)};
    }
    /// left x (size * right) view, columns indexed by (i, b).
    Eigen::Map<const RowMatrix> right_unfolding() const {
        return {values.data(), static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(size * right)};
    }
    /// left x right matrix for a fixed node index i.
    Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>> slice(std::size_t i) const {
        return {values.data() + i * right, static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(right),
                Eigen::OuterStride<>(static_cast<Eigen::Index>(size * right))};
    }
    /// sum_i w[i] * slice(i), a left x right matrix.
    RowMatrix contract(std::span<const double> w) const;
};

/// d-dimensional grid function in tensor-train form. Immutable once built;
/// the constructor checks that the rank chain is consistent with R_0 = R_d = 1.
class TTTensor {
public:
    TTTensor() = default;
    explicit TTTensor(std::vector<TTCore> cores);

    std::size_t dim() const { return cores_.size(); }
    std::vector<std::size_t> mode_sizes() const;
    /// R_0 .. R_d.
    std::vector<std::size_t> ranks() const;
    std::size_t max_rank() const;
    std::size_t parameter_count() const;

    const TTCore& core(std::size_t k) const { return cores_.at(k); }
    const std::vector<TTCore>& cores() const { return cores_; }

    static TTTensor constant(std::span<const std::size_t> mode_sizes, double value);
    static TTTensor zeros(std::span<const std::size_t> mode_sizes) { return constant(mode_sizes, 0.0); }
    /// Rank-1 outer product of per-mode vectors.
    static TTTensor rank_one(const std::vector<std::vector<double>>& factors);

private:
    std::vector<TTCore> cores_;
};

/// Row-major dense tensor (last index fastest), used for construction and oracles.
struct DenseTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    DenseTensor() = default;
    explicit DenseTensor(std::vector<std::size_t> shape);
    DenseTensor(std::vector<std::size_t> shape, std::vector<double> values);

    std::size_t flat_index(std::span<const std::size_t> idx) const;
    double& operator[](std::span<const std::size_t> idx) { return values[flat_index(idx)]; }
    double operator[](std::span<const std::size_t> idx) const { return values[flat_index(idx)]; }
};

/// TT-SVD with per-unfolding cutoff tol/sqrt(d-1) * ||tensor||_F.
TTTensor tt_from_dense(const DenseTensor& tensor, double tol);

/// Full core-chain contraction. Cost is the dense size times the ranks.
DenseTensor tt_to_dense(const TTTensor& t);

/// Orthogonalize right-to-left, then truncate left-to-right with the same
/// cutoff rule as tt_from_dense. `max_rank` additionally caps every rank.
TTTensor tt_round(const TTTensor& t, double tol, std::size_t max_rank = 0);

TTTensor tt_add(const TTTensor& a, const TTTensor& b);
TTTensor tt_scale(const TTTensor& t, double alpha);
TTTensor tt_hadamard(const TTTensor& a, const TTTensor& b);

/// Multiply core k along its node index by the N_k x N_k matrix m.
TTTensor tt_mode_apply(const TTTensor& t, const Eigen::MatrixXd& m, std::size_t k);

double tt_eval(const TTTensor& t, std::span<const std::size_t> idx);

/// sum over all multi-indices of t[n] * prod_k w_k[n_k], one core at a time.
double tt_integrate(const TTTensor& t, const std::vector<std::vector<double>>& weights);

/// sum over all multi-indices of a[n] * b[n] * prod_k w_k[n_k].
double tt_inner(const TTTensor& a, const TTTensor& b, const std::vector<std::vector<double>>& weights);

/// Plain Frobenius norm (unit weights).
double tt_norm(const TTTensor& t);

/// Largest and smallest entries. Exhaustive when the dense size is at most
/// `exhaustive_limit`; otherwise a multi-start coordinate search, which gives
/// a lower bound on the max and an upper bound on the min.
struct TTExtrema {
    double min = 0.0;
    double max = 0.0;
    MultiIndex argmax;
    bool exact = false;
};
TTExtrema tt_extrema(const TTTensor& t, std::size_t exhaustive_limit = 4'000'000);

}  // namespace ddpmot

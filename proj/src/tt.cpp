#include "ddpmot/tt.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ddpmot {

namespace {

std::size_t product(std::span<const std::size_t> v, std::size_t from = 0) {
    std::size_t p = 1;
    for (std::size_t k = from; k < v.size(); ++k) p *= v[k];
    return p;
}

void require_same_shape(const TTTensor& a, const TTTensor& b, const char* op) {
    if (a.dim() != b.dim() || a.mode_sizes() != b.mode_sizes()) {
        throw InvalidInput(std::string(op) + ": shape mismatch");
    }
}

// Smallest rank r >= 1 whose discarded tail sqrt(sum_{j>=r} s_j^2) <= delta.
std::size_t truncation_rank(const Eigen::VectorXd& s, double delta, std::size_t max_rank) {
    const auto n = static_cast<std::size_t>(s.size());
    std::size_t r = n;
    double tail = 0.0;
    while (r > 1) {
        const double next = tail + s[static_cast<Eigen::Index>(r - 1)] * s[static_cast<Eigen::Index>(r - 1)];
        if (std::sqrt(next) > delta) break;
        tail = next;
        --r;
    }
    if (max_rank > 0) r = std::min(r, max_rank);
    return std::max<std::size_t>(r, 1);
}

// Accepts either unfolding; the right rank follows from the element count.
TTCore core_from_matrix(const RowMatrix& m, std::size_t left, std::size_t size) {
    TTCore c(left, size, static_cast<std::size_t>(m.size()) / (left * size));
    Eigen::Map<RowMatrix>(c.values.data(), m.rows(), m.cols()) = m;
    return c;
}

}  // namespace

TTCore::TTCore(std::size_t left, std::size_t size, std::size_t right)
    : left(left), size(size), right(right), values(left * size * right, 0.0) {}

TTCore::TTCore(std::size_t left, std::size_t size, std::size_t right, std::vector<double> values)
    : left(left), size(size), right(right), values(std::move(values)) {
    if (this->values.size() != left * size * right) {
        throw InvalidInput("TTCore: value count does not match shape");
    }
}

RowMatrix TTCore::contract(std::span<const double> w) const {
    RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(right));
    for (std::size_t a = 0; a < left; ++a) {
        const double* row = values.data() + a * size * right;
        double* dst = out.data() + a * right;
        for (std::size_t i = 0; i < size; ++i) {
            const double wi = w[i];
            if (wi == 0.0) continue;
            const double* src = row + i * right;
            for (std::size_t b = 0; b < right; ++b) dst[b] += wi * src[b];
        }
    }
    return out;
}

TTTensor::TTTensor(std::vector<TTCore> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw InvalidInput("TTTensor: dimension must be positive");
    if (cores_.front().left != 1 || cores_.back().right != 1) {
        throw InvalidInput("TTTensor: boundary ranks must be 1");
    }
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        const auto& c = cores_[k];
        if (c.size == 0 || c.left == 0 || c.right == 0) throw InvalidInput("TTTensor: empty core");
        if (c.values.size() != c.left * c.size * c.right) throw InvalidInput("TTTensor: core storage mismatch");
        if (k + 1 < cores_.size() && c.right != cores_[k + 1].left) {
            throw InvalidInput("TTTensor: inconsistent rank between cores " + std::to_string(k) + " and " +
                               std::to_string(k + 1));
        }
    }
}

std::vector<std::size_t> TTTensor::mode_sizes() const {
    std::vector<std::size_t> n;
    n.reserve(cores_.size());
    for (const auto& c : cores_) n.push_back(c.size);
    return n;
}

std::vector<std::size_t> TTTensor::ranks() const {
    std::vector<std::size_t> r;
    r.reserve(cores_.size() + 1);
    r.push_back(1);
    for (const auto& c : cores_) r.push_back(c.right);
    return r;
}

std::size_t TTTensor::max_rank() const {
    const auto r = ranks();
    return *std::max_element(r.begin(), r.end());
}

std::size_t TTTensor::parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : cores_) n += c.values.size();
    return n;
}

TTTensor TTTensor::constant(std::span<const std::size_t> mode_sizes, double value) {
    std::vector<std::vector<double>> factors;
    for (std::size_t k = 0; k < mode_sizes.size(); ++k) {
        factors.emplace_back(mode_sizes[k], k == 0 ? value : 1.0);
    }
    return rank_one(factors);
}

TTTensor TTTensor::rank_one(const std::vector<std::vector<double>>& factors) {
    if (factors.empty()) throw InvalidInput("rank_one: dimension must be positive");
    std::vector<TTCore> cores;
    for (const auto& f : factors) {
        if (f.empty()) throw InvalidInput("rank_one: empty factor");
        cores.emplace_back(1, f.size(), 1, f);
    }
    return TTTensor(std::move(cores));
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape) : shape(std::move(shape)) {
    values.assign(product(this->shape), 0.0);
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape(std::move(shape)), values(std::move(values)) {
    if (this->values.size() != product(this->shape)) throw InvalidInput("DenseTensor: size mismatch");
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) flat = flat * shape[k] + idx[k];
    return flat;
}

TTTensor tt_from_dense(const DenseTensor& tensor, double tol) {
    const std::size_t d = tensor.shape.size();
    if (d == 0) throw InvalidInput("tt_from_dense: dimension must be positive");
    for (auto n : tensor.shape) {
        if (n == 0) throw InvalidInput("tt_from_dense: mode size 0");
    }
    if (!(tol > 0.0 && tol < 1.0)) throw InvalidInput("tt_from_dense: tol must lie in (0, 1)");
    if (tensor.values.size() != product(tensor.shape)) throw InvalidInput("tt_from_dense: size mismatch");

    const double norm = Eigen::Map<const Eigen::VectorXd>(tensor.values.data(),
                                                          static_cast<Eigen::Index>(tensor.values.size()))
                            .norm();
    const double delta = d > 1 ? tol / std::sqrt(static_cast<double>(d - 1)) * norm : 0.0;

    std::vector<TTCore> cores;
    std::vector<double> rest = tensor.values;
    std::size_t r = 1;
    for (std::size_t k = 0; k + 1 < d; ++k) {
        const std::size_t rows = r * tensor.shape[k];
        const std::size_t cols = rest.size() / rows;
        Eigen::Map<const RowMatrix> c(rest.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        Eigen::BDCSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const std::size_t rk = truncation_rank(svd.singularValues(), delta, 0);
        const auto rki = static_cast<Eigen::Index>(rk);
        cores.push_back(core_from_matrix(svd.matrixU().leftCols(rki), r, tensor.shape[k]));
        RowMatrix next = svd.singularValues().head(rki).asDiagonal() * svd.matrixV().leftCols(rki).transpose();
        rest.assign(next.data(), next.data() + next.size());
        r = rk;
    }
    cores.emplace_back(r, tensor.shape[d - 1], 1, rest);
    return TTTensor(std::move(cores));
}

DenseTensor tt_to_dense(const TTTensor& t) {
    // Left-to-right: partial is (prod of leading sizes) x R_k.
    RowMatrix partial = t.core(0).left_unfolding();
    for (std::size_t k = 1; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        RowMatrix next = partial * c.right_unfolding();  // rows x (n_k * R_{k+1}), row-major == reshape
        partial = Eigen::Map<RowMatrix>(next.data(), next.rows() * static_cast<Eigen::Index>(c.size),
                                        static_cast<Eigen::Index>(c.right));
    }
    return DenseTensor(t.mode_sizes(), std::vector<double>(partial.data(), partial.data() + partial.size()));
}

TTTensor tt_round(const TTTensor& t, double tol, std::size_t max_rank) {
    if (!(tol >= 0.0 && tol < 1.0)) throw InvalidInput("tt_round: tol must lie in [0, 1)");
    const std::size_t d = t.dim();
    std::vector<TTCore> cores = t.cores();
    if (d == 1) return t;

    // Right-to-left orthogonalization: cores 1..d-1 become row-orthonormal.
    for (std::size_t k = d - 1; k > 0; --k) {
        const auto& c = cores[k];
        Eigen::MatrixXd mt = c.right_unfolding().transpose();  // (n r1) x r0
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(mt);
        const auto rnew = std::min(mt.rows(), mt.cols());
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(mt.rows(), rnew);
        Eigen::MatrixXd rr = qr.matrixQR().topRows(rnew).triangularView<Eigen::Upper>();
        cores[k] = core_from_matrix(q.transpose(), static_cast<std::size_t>(rnew), c.size);
        // Previous core absorbs R^T on its right index.
        RowMatrix prev = cores[k - 1].left_unfolding() * rr.transpose();
        cores[k - 1] = core_from_matrix(prev, cores[k - 1].left, cores[k - 1].size);
    }

    const double norm = Eigen::Map<const Eigen::VectorXd>(cores[0].values.data(),
                                                          static_cast<Eigen::Index>(cores[0].values.size()))
                            .norm();
    const double delta = tol / std::sqrt(static_cast<double>(d - 1)) * norm;

    for (std::size_t k = 0; k + 1 < d; ++k) {
        const auto& c = cores[k];
        Eigen::BDCSVD<Eigen::MatrixXd> svd(c.left_unfolding(), Eigen::ComputeThinU | Eigen::ComputeThinV);
        const std::size_t rk = truncation_rank(svd.singularValues(), delta, max_rank);
        const auto rki = static_cast<Eigen::Index>(rk);
        RowMatrix sv = svd.singularValues().head(rki).asDiagonal() * svd.matrixV().leftCols(rki).transpose();
        const std::size_t left = c.left, size = c.size;
        cores[k] = core_from_matrix(svd.matrixU().leftCols(rki), left, size);
        RowMatrix next = sv * cores[k + 1].right_unfolding();
        const TTCore& nxt = cores[k + 1];
        cores[k + 1] = TTCore(rk, nxt.size, nxt.right, std::vector<double>(next.data(), next.data() + next.size()));
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_add(const TTTensor& a, const TTTensor& b) {
    require_same_shape(a, b, "tt_add");
    const std::size_t d = a.dim();
    if (d == 1) {
        TTCore c = a.core(0);
        for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] += b.core(0).values[i];
        return TTTensor({c});
    }
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < d; ++k) {
        const auto& ca = a.core(k);
        const auto& cb = b.core(k);
        const std::size_t left = k == 0 ? 1 : ca.left + cb.left;
        const std::size_t right = k + 1 == d ? 1 : ca.right + cb.right;
        const std::size_t aoff_l = 0, boff_l = k == 0 ? 0 : ca.left;
        const std::size_t aoff_r = 0, boff_r = k + 1 == d ? 0 : ca.right;
        TTCore c(left, ca.size, right);
        for (std::size_t i = 0; i < ca.size; ++i) {
            for (std::size_t x = 0; x < ca.left; ++x)
                for (std::size_t y = 0; y < ca.right; ++y) c(aoff_l + x, i, aoff_r + y) = ca(x, i, y);
            for (std::size_t x = 0; x < cb.left; ++x)
                for (std::size_t y = 0; y < cb.right; ++y) c(boff_l + x, i, boff_r + y) = cb(x, i, y);
        }
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_scale(const TTTensor& t, double alpha) {
    std::vector<TTCore> cores = t.cores();
    for (auto& v : cores[0].values) v *= alpha;
    return TTTensor(std::move(cores));
}

TTTensor tt_hadamard(const TTTensor& a, const TTTensor& b) {
    require_same_shape(a, b, "tt_hadamard");
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < a.dim(); ++k) {
        const auto& ca = a.core(k);
        const auto& cb = b.core(k);
        TTCore c(ca.left * cb.left, ca.size, ca.right * cb.right);
        for (std::size_t x1 = 0; x1 < ca.left; ++x1)
            for (std::size_t x2 = 0; x2 < cb.left; ++x2)
                for (std::size_t i = 0; i < ca.size; ++i)
                    for (std::size_t y1 = 0; y1 < ca.right; ++y1)
                        for (std::size_t y2 = 0; y2 < cb.right; ++y2)
                            c(x1 * cb.left + x2, i, y1 * cb.right + y2) = ca(x1, i, y1) * cb(x2, i, y2);
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_mode_apply(const TTTensor& t, const Eigen::MatrixXd& m, std::size_t k) {
    if (k >= t.dim()) throw InvalidInput("tt_mode_apply: mode index out of range");
    const auto& c = t.core(k);
    if (static_cast<std::size_t>(m.rows()) != c.size || static_cast<std::size_t>(m.cols()) != c.size) {
        throw InvalidInput("tt_mode_apply: matrix size does not match mode size");
    }
    std::vector<TTCore> cores = t.cores();
    TTCore out(c.left, c.size, c.right);
    const auto n = static_cast<Eigen::Index>(c.size);
    const auto r1 = static_cast<Eigen::Index>(c.right);
    for (std::size_t a = 0; a < c.left; ++a) {
        Eigen::Map<const RowMatrix> src(c.values.data() + a * c.size * c.right, n, r1);
        Eigen::Map<RowMatrix> dst(out.values.data() + a * c.size * c.right, n, r1);
        dst.noalias() = m * src;
    }
    cores[k] = std::move(out);
    return TTTensor(std::move(cores));
}

double tt_eval(const TTTensor& t, std::span<const std::size_t> idx) {
    if (idx.size() != t.dim()) throw InvalidInput("tt_eval: index length does not match dimension");
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        if (idx[k] >= c.size) throw InvalidInput("tt_eval: index out of range in mode " + std::to_string(k));
        v = v * c.slice(idx[k]);
    }
    return v(0);
}

double tt_integrate(const TTTensor& t, const std::vector<std::vector<double>>& weights) {
    if (weights.size() != t.dim()) throw InvalidInput("tt_integrate: one weight vector per mode required");
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        if (weights[k].size() != c.size) throw InvalidInput("tt_integrate: weight length mismatch in mode " + std::to_string(k));
        v = v * c.contract(weights[k]);
    }
    return v(0);
}

double tt_inner(const TTTensor& a, const TTTensor& b, const std::vector<std::vector<double>>& weights) {
    require_same_shape(a, b, "tt_inner");
    if (weights.size() != a.dim()) throw InvalidInput("tt_inner: one weight vector per mode required");
    // acc is R_a x R_b.
    Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
    for (std::size_t k = 0; k < a.dim(); ++k) {
        const auto& ca = a.core(k);
        const auto& cb = b.core(k);
        if (weights[k].size() != ca.size) throw InvalidInput("tt_inner: weight length mismatch");
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ca.right), static_cast<Eigen::Index>(cb.right));
        for (std::size_t i = 0; i < ca.size; ++i) {
            if (weights[k][i] == 0.0) continue;
            next.noalias() += weights[k][i] * (ca.slice(i).transpose() * acc * cb.slice(i));
        }
        acc = std::move(next);
    }
    return acc(0, 0);
}

double tt_norm(const TTTensor& t) {
    std::vector<std::vector<double>> ones;
    for (auto n : t.mode_sizes()) ones.emplace_back(n, 1.0);
    return std::sqrt(std::max(0.0, tt_inner(t, t, ones)));
}

TTExtrema tt_extrema(const TTTensor& t, std::size_t exhaustive_limit) {
    const auto sizes = t.mode_sizes();
    TTExtrema out;
    if (product(sizes) <= exhaustive_limit) {
        const DenseTensor dense = tt_to_dense(t);
        const auto [lo, hi] = std::minmax_element(dense.values.begin(), dense.values.end());
        out.min = *lo;
        out.max = *hi;
        std::size_t flat = static_cast<std::size_t>(hi - dense.values.begin());
        out.argmax.assign(sizes.size(), 0);
        for (std::size_t k = sizes.size(); k-- > 0;) {
            out.argmax[k] = flat % sizes[k];
            flat /= sizes[k];
        }
        out.exact = true;
        return out;
    }

    // Coordinate search: sweep one mode at a time, scanning the whole fiber.
    const std::size_t d = sizes.size();
    Rng rng(0x5eed);
    auto search = [&](MultiIndex idx, bool maximize) {
        double best = tt_eval(t, idx);
        for (int sweep = 0; sweep < 6; ++sweep) {
            bool moved = false;
            for (std::size_t k = 0; k < d; ++k) {
                const std::size_t keep = idx[k];
                std::size_t arg = keep;
                for (std::size_t i = 0; i < sizes[k]; ++i) {
                    idx[k] = i;
                    const double v = tt_eval(t, idx);
                    if (maximize ? v > best : v < best) {
                        best = v;
                        arg = i;
                    }
                }
                idx[k] = arg;
                moved = moved || arg != keep;
            }
            if (!moved) break;
        }
        return std::pair{best, idx};
    };

    out.max = -INFINITY;
    out.min = INFINITY;
    for (int start = 0; start < 8; ++start) {
        MultiIndex idx(d);
        if (start == 0) {
            for (std::size_t k = 0; k < d; ++k) idx[k] = sizes[k] / 2;
        } else {
            for (std::size_t k = 0; k < d; ++k) idx[k] = rng.below(sizes[k]);
        }
        auto [hi, arg] = search(idx, true);
        if (hi > out.max) {
            out.max = hi;
            out.argmax = arg;
        }
        auto [lo, unused] = search(idx, false);
        out.min = std::min(out.min, lo);
    }
    return out;
}

}  // namespace ddpmot

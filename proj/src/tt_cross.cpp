#include "ddpmot/tt_cross.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

namespace ddpmot {

MaxvolResult maxvol(const Eigen::MatrixXd& a, double tau, std::size_t max_iterations) {
    const auto n = a.rows();
    const auto r = a.cols();
    if (r == 0 || n < r) throw InvalidInput("maxvol: matrix must be tall with at least one column");

    // Initial rows from Gaussian elimination with partial pivoting.
    Eigen::MatrixXd work = a;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index j = 0; j < r; ++j) {
        Eigen::Index p;
        work.col(j).tail(n - j).cwiseAbs().maxCoeff(&p);
        p += j;
        if (p != j) {
            work.row(p).swap(work.row(j));
            std::swap(perm[static_cast<std::size_t>(p)], perm[static_cast<std::size_t>(j)]);
        }
        const double pivot = work(j, j);
        if (pivot == 0.0) continue;
        work.block(j + 1, j, n - j - 1, 1) /= pivot;
        work.block(j + 1, j + 1, n - j - 1, r - j - 1).noalias() -=
            work.block(j + 1, j, n - j - 1, 1) * work.block(j, j + 1, 1, r - j - 1);
    }
    std::vector<std::size_t> rows(static_cast<std::size_t>(r));
    for (Eigen::Index j = 0; j < r; ++j) rows[static_cast<std::size_t>(j)] = static_cast<std::size_t>(perm[static_cast<std::size_t>(j)]);

    Eigen::MatrixXd square(r, r);
    for (Eigen::Index j = 0; j < r; ++j) square.row(j) = a.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(square.transpose());
    if (!lu.isInvertible()) throw NumericalError("maxvol: singular starting submatrix");
    Eigen::MatrixXd b = lu.solve(a.transpose()).transpose();  // a * square^-1

    for (std::size_t it = 0; it < max_iterations; ++it) {
        Eigen::Index i, j;
        const double big = b.cwiseAbs().maxCoeff(&i, &j);
        if (big <= tau) break;
        const Eigen::VectorXd col = b.col(j);
        Eigen::RowVectorXd row = b.row(i);
        row(j) -= 1.0;
        b.noalias() -= (col / b(i, j)) * row;
        rows[static_cast<std::size_t>(j)] = static_cast<std::size_t>(i);
    }
    return {std::move(rows), std::move(b)};
}

namespace {

std::size_t saturating_product(std::span<const std::size_t> v, std::size_t from, std::size_t to) {
    std::size_t p = 1;
    for (std::size_t k = from; k < to; ++k) {
        if (p > std::numeric_limits<std::size_t>::max() / v[k]) return std::numeric_limits<std::size_t>::max();
        p *= v[k];
    }
    return p;
}

class CrossState {
public:
    CrossState(const EntryFunction& f, std::span<const std::size_t> sizes) : f_(f), sizes_(sizes.begin(), sizes.end()) {}

    double call(const MultiIndex& idx) {
        const double v = f_(idx);
        ++evaluations;
        if (!std::isfinite(v)) throw NumericalError("tt_cross: non-finite function value", idx);
        return v;
    }

    // Fiber at mode k: rows (a, i) over left[k] x N_k, columns over right[k].
    RowMatrix fiber(std::size_t k, const std::vector<MultiIndex>& left, const std::vector<MultiIndex>& right) {
        const std::size_t n = sizes_[k];
        RowMatrix c(static_cast<Eigen::Index>(left.size() * n), static_cast<Eigen::Index>(right.size()));
        MultiIndex idx(sizes_.size());
        for (std::size_t a = 0; a < left.size(); ++a) {
            std::copy(left[a].begin(), left[a].end(), idx.begin());
            for (std::size_t i = 0; i < n; ++i) {
                idx[k] = i;
                for (std::size_t b = 0; b < right.size(); ++b) {
                    std::copy(right[b].begin(), right[b].end(), idx.begin() + static_cast<std::ptrdiff_t>(k + 1));
                    c(static_cast<Eigen::Index>(a * n + i), static_cast<Eigen::Index>(b)) = call(idx);
                }
            }
        }
        return c;
    }

    std::size_t evaluations = 0;

private:
    const EntryFunction& f_;
    std::vector<std::size_t> sizes_;
};

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const auto q = std::min(m.rows(), m.cols());
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), q);
}

}  // namespace

std::vector<std::vector<MultiIndex>> tt_right_index_sets(const TTTensor& t) {
    const std::size_t d = t.dim();
    std::vector<std::vector<MultiIndex>> sets(d > 0 ? d - 1 : 0);
    if (d < 2) return sets;
    // rest: the part right of the current core evaluated at the chosen suffixes,
    // an R_{k+1} x |J_{k+1}| matrix.
    Eigen::MatrixXd rest = Eigen::MatrixXd::Ones(1, 1);
    std::vector<MultiIndex> chosen{MultiIndex{}};
    for (std::size_t k = d - 1; k > 0; --k) {
        const TTCore& c = t.core(k);
        const auto cols = static_cast<Eigen::Index>(chosen.size());
        // Columns (i, b): core slice i times rest column b.
        Eigen::MatrixXd wide(static_cast<Eigen::Index>(c.left), static_cast<Eigen::Index>(c.size) * cols);
        for (std::size_t i = 0; i < c.size; ++i) {
            wide.middleCols(static_cast<Eigen::Index>(i) * cols, cols) = c.slice(i) * rest;
        }
        const MaxvolResult mv = maxvol(thin_q(wide.transpose()));
        std::vector<MultiIndex> next;
        Eigen::MatrixXd next_rest(wide.rows(), static_cast<Eigen::Index>(mv.rows.size()));
        for (std::size_t j = 0; j < mv.rows.size(); ++j) {
            const std::size_t p = mv.rows[j];
            MultiIndex suffix{p / chosen.size()};
            const auto& tail = chosen[p % chosen.size()];
            suffix.insert(suffix.end(), tail.begin(), tail.end());
            next.push_back(std::move(suffix));
            next_rest.col(static_cast<Eigen::Index>(j)) = wide.col(static_cast<Eigen::Index>(p));
        }
        chosen = std::move(next);
        rest = std::move(next_rest);
        sets[k - 1] = chosen;
    }
    return sets;
}

CrossResult tt_cross(const EntryFunction& f, std::span<const std::size_t> sizes, const CrossOptions& opt) {
    const std::size_t d = sizes.size();
    if (d == 0) throw InvalidInput("tt_cross: dimension must be positive");
    for (auto n : sizes) {
        if (n == 0) throw InvalidInput("tt_cross: mode size 0");
    }
    if (!(opt.tol > 0.0 && opt.tol < 1.0)) throw InvalidInput("tt_cross: tol must lie in (0, 1)");
    if (opt.max_rank < 1) throw InvalidInput("tt_cross: max_rank must be at least 1");
    if (!opt.start_ranks.empty() && opt.start_ranks.size() + 1 != d) {
        throw InvalidInput("tt_cross: start_ranks needs one entry per interface");
    }

    CrossState state(f, sizes);
    CrossResult result;

    if (d == 1) {
        TTCore c(1, sizes[0], 1);
        for (std::size_t i = 0; i < sizes[0]; ++i) c.values[i] = state.call({i});
        result.tensor = TTTensor({std::move(c)});
        result.evaluations = state.evaluations;
        return result;
    }

    Rng rng(opt.seed);

    // Every check draws a fresh uniform held-out set, so a run of passing
    // checks is a run of independent tests. The worst sampled index of a
    // failing check seeds the next rank increase.
    std::vector<MultiIndex> hints;
    auto validate = [&](const TTTensor& t) {
        double err2 = 0.0, ref2 = 0.0, worst = -1.0;
        MultiIndex idx(d), worst_idx;
        for (std::size_t s = 0; s < opt.validation_size; ++s) {
            for (std::size_t k = 0; k < d; ++k) idx[k] = rng.below(sizes[k]);
            const double v = state.call(idx);
            const double e = tt_eval(t, idx) - v;
            err2 += e * e;
            ref2 += v * v;
            if (std::abs(e) > worst) {
                worst = std::abs(e);
                worst_idx = idx;
            }
        }
        if (opt.validation_size == 0) return 0.0;
        const double err = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
        if (err > opt.validation_margin * opt.tol) hints.push_back(std::move(worst_idx));
        return err;
    };
    // Full-grid relative distance; rounding orthogonalizes the difference so
    // that its norm is not lost to cancellation.
    auto distance = [](const TTTensor& a, const TTTensor& b) {
        const double na = tt_norm(a);
        const double diff = tt_norm(tt_round(tt_add(a, tt_scale(b, -1.0)), 1e-15));
        return na > 0.0 ? diff / na : diff;
    };

    std::vector<std::size_t> caps(d - 1), target(d - 1);
    for (std::size_t k = 0; k + 1 < d; ++k) {
        caps[k] = std::min({opt.max_rank, saturating_product(sizes, 0, k + 1), saturating_product(sizes, k + 1, d)});
        const std::size_t start = opt.start_ranks.empty() ? opt.start_rank : opt.start_ranks[k];
        target[k] = std::clamp<std::size_t>(start, 1, caps[k]);
    }

    std::vector<std::vector<MultiIndex>> left(d), right(d);
    left[0] = {MultiIndex{}};
    right[d - 1] = {MultiIndex{}};
    if (!opt.initial_right.empty()) {
        if (opt.initial_right.size() + 1 != d) throw InvalidInput("tt_cross: initial_right needs one set per interface");
        for (std::size_t k = 0; k + 1 < d; ++k) {
            for (const auto& suffix : opt.initial_right[k]) {
                if (suffix.size() != d - 1 - k) throw InvalidInput("tt_cross: initial suffix has the wrong length");
                for (std::size_t j = 0; j < suffix.size(); ++j) {
                    if (suffix[j] >= sizes[k + 1 + j]) throw InvalidInput("tt_cross: initial suffix out of range");
                }
            }
            right[k] = opt.initial_right[k];
            if (right[k].size() > caps[k]) right[k].resize(caps[k]);
            target[k] = std::max<std::size_t>(right[k].size(), 1);
        }
    }

    auto augment_right = [&]() {
        for (std::size_t k = 0; k + 1 < d; ++k) {
            std::set<MultiIndex> present(right[k].begin(), right[k].end());
            for (const auto& h : hints) {
                if (right[k].size() >= target[k]) break;
                MultiIndex suffix(h.begin() + static_cast<std::ptrdiff_t>(k + 1), h.end());
                if (present.insert(suffix).second) right[k].push_back(std::move(suffix));
            }
            int attempts = 0;
            while (right[k].size() < target[k]) {
                MultiIndex suffix(d - 1 - k);
                for (std::size_t j = 0; j < suffix.size(); ++j) suffix[j] = rng.below(sizes[k + 1 + j]);
                if (present.insert(suffix).second || ++attempts > 50) right[k].push_back(std::move(suffix));
            }
        }
        hints.clear();
    };

    std::vector<TTCore> cores(d);
    double best_error = std::numeric_limits<double>::infinity();
    TTTensor best;
    std::size_t sweeps_at_cap = 0;
    bool grow_now = false;

    // With `confirm`, a passing sweep is provisional. Ranks grow by one and
    // the next sweep is accepted when it passes as well and differs from the
    // provisional tensor by less than the threshold over the whole grid. The sampled
    // check alone misses errors in the thin tails of localized functions.
    std::optional<TTTensor> provisional;
    auto accept = [&](TTTensor t) {
        ++result.half_sweeps;
        const double err = validate(t);
        const bool pass = err <= opt.validation_margin * opt.tol;
        if (pass && provisional) {
            const double change = distance(t, *provisional);
            if (change <= opt.validation_margin * opt.tol) {
                best_error = std::max(err, change);
                best = std::move(t);
                return true;
            }
        }
        if (!pass) {
            if (!provisional && err < best_error) {
                best_error = err;
                best = t;
            }
            return false;
        }
        if (!opt.confirm) {
            best_error = err;
            best = std::move(t);
            return true;
        }
        best_error = err;
        best = t;
        provisional = std::move(t);
        grow_now = true;
        return false;
    };

    auto left_to_right = [&]() {
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t n = sizes[k];
            RowMatrix c = state.fiber(k, left[k], right[k]);
            if (k + 1 == d) {
                cores[k] = TTCore(left[k].size(), n, 1, std::vector<double>(c.data(), c.data() + c.size()));
                break;
            }
            const MaxvolResult mv = maxvol(thin_q(c));
            RowMatrix coeff = mv.coefficients;
            cores[k] = TTCore(left[k].size(), n, static_cast<std::size_t>(coeff.cols()),
                              std::vector<double>(coeff.data(), coeff.data() + coeff.size()));
            std::vector<MultiIndex> next;
            next.reserve(mv.rows.size());
            for (auto p : mv.rows) {
                MultiIndex prefix = left[k][p / n];
                prefix.push_back(p % n);
                next.push_back(std::move(prefix));
            }
            left[k + 1] = std::move(next);
        }
    };

    auto right_to_left = [&]() {
        for (std::size_t k = d; k-- > 0;) {
            const std::size_t n = sizes[k];
            RowMatrix c = state.fiber(k, left[k], right[k]);  // buffer is also left x (n * right)
            const std::size_t rcols = right[k].size();
            if (k == 0) {
                cores[0] = TTCore(1, n, rcols, std::vector<double>(c.data(), c.data() + c.size()));
                break;
            }
            Eigen::Map<const RowMatrix> wide(c.data(), static_cast<Eigen::Index>(left[k].size()),
                                             static_cast<Eigen::Index>(n * rcols));
            const MaxvolResult mv = maxvol(thin_q(wide.transpose()));
            RowMatrix coeff = mv.coefficients.transpose();  // q x (n * rcols)
            cores[k] = TTCore(static_cast<std::size_t>(coeff.rows()), n, rcols,
                              std::vector<double>(coeff.data(), coeff.data() + coeff.size()));
            std::vector<MultiIndex> next;
            next.reserve(mv.rows.size());
            for (auto p : mv.rows) {
                MultiIndex suffix{p / rcols};
                suffix.insert(suffix.end(), right[k][p % rcols].begin(), right[k][p % rcols].end());
                next.push_back(std::move(suffix));
            }
            right[k - 1] = std::move(next);
        }
    };

    while (true) {
        augment_right();
        left_to_right();
        if (accept(TTTensor(cores))) break;
        if (!grow_now) {
            right_to_left();
            if (accept(TTTensor(cores))) break;
        }
        grow_now = false;

        bool grew = false;
        for (std::size_t k = 0; k + 1 < d; ++k) {
            if (target[k] < caps[k]) {
                ++target[k];
                grew = true;
            }
        }
        if (!grew && ++sweeps_at_cap > opt.sweeps_at_cap) {
            result.rank_capped = true;
            break;
        }
    }

    result.tensor = std::move(best);
    result.validation_error = best_error;
    if (opt.round_tol > 0.0) result.tensor = tt_round(result.tensor, opt.round_tol);
    result.evaluations = state.evaluations;
    return result;
}

}  // namespace ddpmot

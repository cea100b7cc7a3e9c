#pragma once

#include "ddpmot/tt.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ddpmot {

/// Black-box tensor entry: multi-index -> value. Must be deterministic.
using EntryFunction = std::function<double(std::span<const std::size_t>)>;

struct CrossOptions {
    double tol = 1e-8;
    std::size_t max_rank = 30;
    std::size_t start_rank = 2;
    /// Per-interface starting ranks (size d-1); overrides start_rank when set.
    std::vector<std::size_t> start_ranks;
    std::size_t validation_size = 1000;
    /// Checks pass at validation_margin * tol. A 1000-point estimate of a
    /// localized function's error undershoots often enough to need the slack.
    double validation_margin = 0.1;
    std::uint64_t seed = 0x7a11c505;
    /// Extra sweeps allowed once every interface sits at its rank cap.
    std::size_t sweeps_at_cap = 2;
    /// A passing sweep must be confirmed by a rank-grown sweep that also passes
    /// and lies within the check threshold of it on the full grid; false
    /// accepts the first pass.
    bool confirm = true;
    /// Round the result to this relative accuracy (0 disables). The default only
    /// strips directions at roundoff level, e.g. the spare rank of a separable input.
    double round_tol = 1e-14;
    /// Warm start: right index sets (suffixes) for interfaces 0..d-2, for
    /// example from tt_right_index_sets of a nearby tensor. Random suffixes
    /// are used where this is empty.
    std::vector<std::vector<MultiIndex>> initial_right;
};

struct CrossResult {
    TTTensor tensor;
    /// Relative 2-norm error on the last uniform held-out set, or the
    /// full-grid change against the provisional sweep when that is larger.
    double validation_error = 0.0;
    bool rank_capped = false;
    std::size_t evaluations = 0;
    std::size_t half_sweeps = 0;
};

/// Alternating maxvol cross approximation (left-to-right and right-to-left
/// sweeps over QR-orthogonalized fibers) with rank growth by one per failed
/// validation. Throws NumericalError carrying the index on a non-finite entry.
CrossResult tt_cross(const EntryFunction& f, std::span<const std::size_t> mode_sizes, const CrossOptions& options = {});

/// Row indices of a locally maximal-volume r x r submatrix of the tall n x r
/// matrix a, and the coefficients b = a * a[rows]^-1.
struct MaxvolResult {
    std::vector<std::size_t> rows;
    Eigen::MatrixXd coefficients;
};
/// Nested right index sets of a TT tensor by a right-to-left maxvol sweep over
/// its QR-orthogonalized unfoldings; entry k holds suffixes for modes k+1..d-1.
std::vector<std::vector<MultiIndex>> tt_right_index_sets(const TTTensor& t);

MaxvolResult maxvol(const Eigen::MatrixXd& a, double tau = 1.01, std::size_t max_iterations = 200);

}  // namespace ddpmot

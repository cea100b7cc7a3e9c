#pragma once

#include "ddpmot/flow.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace ddpmot {

struct Assignment {
    /// Mean squared distance of the optimal pairing.
    double cost = 0.0;
    /// x_i is matched to y_{permutation[i]}.
    std::vector<std::size_t> permutation;
};

/// Exact minimum-cost perfect matching under squared Euclidean cost
/// (shortest augmenting paths with dual potentials, O(n^3)).
Assignment ot_assignment(const PointCloud& x, const PointCloud& y);

/// Mean squared distance of the row-by-row pairing.
double paired_cost(const PointCloud& x, const PointCloud& y);

/// Mean squared distance of the pairing i -> permutation[i], summed in row order.
double permuted_cost(const PointCloud& x, const PointCloud& y, const std::vector<std::size_t>& permutation);

struct TransportReport {
    std::size_t n = 0;
    double cost_ot = 0.0;
    double cost_encoder = 0.0;
    double epsilon_rel = 0.0;
    std::vector<std::size_t> assignment;
    double identity_fraction = 0.0;
    std::size_t excluded = 0;
    std::map<std::string, double> timings;
};

/// OT versus encoder pairing between X0 and X1. Rows flagged in `failed` are
/// dropped from both clouds first.
TransportReport compare(const PointCloud& x0, const PointCloud& x1, const std::vector<bool>& failed = {});

void to_json(nlohmann::json& j, const TransportReport& r);
void from_json(const nlohmann::json& j, TransportReport& r);

}  // namespace ddpmot

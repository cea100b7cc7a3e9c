#include "ddpmot/transport.hpp"

#include "ddpmot/error.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace ddpmot {

namespace {

void check_pair(const PointCloud& x, const PointCloud& y) {
    if (x.size() != y.size() || x.size() == 0) throw InvalidInput("transport: clouds must be nonempty and of equal size");
    if (x.dim() != y.dim()) throw InvalidInput("transport: clouds differ in dimension");
    if (!x.points.allFinite() || !y.points.allFinite()) throw InvalidInput("transport: non-finite coordinates");
}

double sqdist(const PointCloud& x, std::size_t i, const PointCloud& y, std::size_t j) {
    const auto a = x.point(i);
    const auto b = y.point(j);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

}  // namespace

double permuted_cost(const PointCloud& x, const PointCloud& y, const std::vector<std::size_t>& permutation) {
    check_pair(x, y);
    if (permutation.size() != x.size()) throw InvalidInput("permuted_cost: permutation has the wrong length");
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) total += sqdist(x, i, y, permutation[i]);
    return total / static_cast<double>(x.size());
}

double paired_cost(const PointCloud& x, const PointCloud& y) {
    check_pair(x, y);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) total += sqdist(x, i, y, i);
    return total / static_cast<double>(x.size());
}

Assignment ot_assignment(const PointCloud& x, const PointCloud& y) {
    check_pair(x, y);
    const std::size_t n = x.size();
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sqdist(x, i, y, j);
    }

    // Rows are added one at a time; column 0 is a virtual source. p[j] is the
    // row (1-based) currently matched to column j.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment out;
    out.permutation.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) out.permutation[p[j] - 1] = j - 1;
    out.cost = permuted_cost(x, y, out.permutation);
    return out;
}

TransportReport compare(const PointCloud& x0, const PointCloud& x1, const std::vector<bool>& failed) {
    using clock = std::chrono::steady_clock;
    if (x0.size() != x1.size()) throw InvalidInput("compare: clouds differ in size");
    if (!failed.empty() && failed.size() != x0.size()) throw InvalidInput("compare: failure mask has the wrong length");

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (failed.empty() || !failed[i]) keep.push_back(i);
    }
    auto subset = [&](const PointCloud& c) {
        RowMatrix m(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(c.dim()));
        for (std::size_t r = 0; r < keep.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = c.points.row(static_cast<Eigen::Index>(keep[r]));
        return PointCloud(std::move(m));
    };
    const PointCloud a = keep.size() == x0.size() ? x0 : subset(x0);
    const PointCloud b = keep.size() == x1.size() ? x1 : subset(x1);

    TransportReport r;
    r.n = keep.size();
    r.excluded = x0.size() - keep.size();
    const auto start = clock::now();
    const Assignment ot = ot_assignment(a, b);
    r.timings["ot_seconds"] = std::chrono::duration<double>(clock::now() - start).count();
    r.cost_ot = ot.cost;
    r.cost_encoder = paired_cost(a, b);
    if (r.cost_ot == 0.0) {
        if (r.cost_encoder > 0.0) throw NumericalError("compare: optimal cost is zero but the encoder cost is not");
        r.epsilon_rel = 0.0;
    } else {
        r.epsilon_rel = (r.cost_encoder - r.cost_ot) / r.cost_ot;
    }
    r.assignment = ot.permutation;
    std::size_t fixed = 0;
    for (std::size_t i = 0; i < r.n; ++i) fixed += r.assignment[i] == i;
    r.identity_fraction = static_cast<double>(fixed) / static_cast<double>(r.n);
    return r;
}

void to_json(nlohmann::json& j, const TransportReport& r) {
    j = {{"n", r.n},
         {"cost_ot", r.cost_ot},
         {"cost_encoder", r.cost_encoder},
         {"epsilon_rel", r.epsilon_rel},
         {"assignment", r.assignment},
         {"identity_fraction", r.identity_fraction},
         {"excluded", r.excluded},
         {"timings", r.timings}};
}

void from_json(const nlohmann::json& j, TransportReport& r) {
    j.at("n").get_to(r.n);
    j.at("cost_ot").get_to(r.cost_ot);
    j.at("cost_encoder").get_to(r.cost_encoder);
    j.at("epsilon_rel").get_to(r.epsilon_rel);
    j.at("assignment").get_to(r.assignment);
    j.at("identity_fraction").get_to(r.identity_fraction);
    j.at("excluded").get_to(r.excluded);
    j.at("timings").get_to(r.timings);
}

}  // namespace ddpmot

#include "support.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/transport.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>

using namespace ddpmot;
using namespace testing;

namespace {

PointCloud random_cloud(std::size_t n, std::size_t d, Rng& rng, double spread = 2.0) {
    PointCloud c(n, d);
    for (Eigen::Index i = 0; i < c.points.size(); ++i) c.points.data()[i] = rng.uniform(-spread, spread);
    return c;
}

// Exhaustive search; squared distances summed in row order like the solver's report.
double brute_force(const PointCloud& x, const PointCloud& y) {
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double s = 0;
            for (std::size_t k = 0; k < x.dim(); ++k) s += (x.point(i)[k] - y.point(perm[i])[k]) * (x.point(i)[k] - y.point(perm[i])[k]);
            total += s;
        }
        best = std::min(best, total / static_cast<double>(x.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

bool is_permutation(std::vector<std::size_t> p) {
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != i) return false;
    return true;
}

}  // namespace

TEST_CASE("ot_assignment: identical clouds and the swap") {
    Rng rng(1);
    const auto x = random_cloud(7, 3, rng);
    const auto same = ot_assignment(x, x);
    CHECK(same.cost == 0.0);
    for (std::size_t i = 0; i < 7; ++i) CHECK(same.permutation[i] == i);

    RowMatrix a(2, 2), b(2, 2);
    a << 0, 0, 1, 0;
    b << 1, 0, 0, 0;
    const auto swap = ot_assignment(PointCloud(a), PointCloud(b));
    CHECK(swap.cost == 0.0);
    CHECK(swap.permutation == std::vector<std::size_t>{1, 0});
}

TEST_CASE("ot_assignment: 6 points against all 720 permutations") {
    Rng rng(2);
    const auto x = random_cloud(6, 2, rng), y = random_cloud(6, 2, rng);
    CHECK(ot_assignment(x, y).cost == brute_force(x, y));
}

TEST_CASE("ot_assignment: exhaustive search on 200 instances, n <= 8") {
    Rng rng(3);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(3);
        const auto x = random_cloud(n, d, rng), y = random_cloud(n, d, rng);
        const auto ot = ot_assignment(x, y);
        CHECK(is_permutation(ot.permutation));
        CHECK(ot.cost == permuted_cost(x, y, ot.permutation));
        mismatches += ot.cost != brute_force(x, y);
    }
    CHECK(mismatches == 0);
}

TEST_CASE("ot_assignment: symmetry and translation covariance") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(60);
        const auto x = random_cloud(n, 3, rng), y = random_cloud(n, 3, rng);
        const double xy = ot_assignment(x, y).cost, yx = ot_assignment(y, x).cost;
        CHECK(std::abs(xy - yx) <= 1e-14 * xy);

        auto xs = x, ys = y;
        const Eigen::RowVector3d shift(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
        xs.points.rowwise() += shift;
        ys.points.rowwise() += shift;
        CHECK(std::abs(ot_assignment(xs, ys).cost - xy) <= 1e-12 * xy);
        CHECK(std::abs(paired_cost(xs, ys) - paired_cost(x, y)) <= 1e-12 * paired_cost(x, y));
        CHECK(paired_cost(x, y) >= xy);
    }
}

TEST_CASE("paired_cost: identical, shifted, naive sum") {
    Rng rng(5);
    const auto x = random_cloud(10, 3, rng);
    CHECK(paired_cost(x, x) == 0.0);
    auto y = x;
    y.points.rowwise() += Eigen::RowVector3d(0.5, -1.0, 2.0);
    CHECK(paired_cost(x, y) == doctest::Approx(0.25 + 1 + 4).epsilon(1e-14));

    const auto z = random_cloud(10, 3, rng);
    double naive = 0;
    for (std::size_t i = 0; i < 10; ++i) naive += (x.points.row(static_cast<Eigen::Index>(i)) - z.points.row(static_cast<Eigen::Index>(i))).squaredNorm();
    CHECK(std::abs(paired_cost(x, z) - naive / 10) <= 1e-14 * naive / 10);
}

TEST_CASE("compare: identity optimal gives zero, shifted reversed collinear is positive") {
    Rng rng(6);
    const auto x = random_cloud(40, 2, rng);
    auto y = x;
    y.points *= 0.5;
    y.points.rowwise() += Eigen::RowVector2d(0.1, 0.2);
    const auto same = compare(x, y);
    CHECK(same.epsilon_rel == 0.0);
    CHECK(same.identity_fraction == 1.0);
    CHECK(same.n == 40);

    RowMatrix line(4, 1), rev(4, 1);
    line << 0, 1, 2, 3;
    // A reversed copy of the same set has zero transport cost, so the
    // reversed points are also shifted along the line.
    rev << 3.5, 2.5, 1.5, 0.5;
    RowMatrix l2(4, 2), r2(4, 2);
    l2 << 0, 0, 1, 1, 2, 2, 3, 3;
    r2 << 3.5, 3.5, 2.5, 2.5, 1.5, 1.5, 0.5, 0.5;
    for (const auto& [a, b] : {std::pair{line, rev}, std::pair{l2, r2}}) {
        const PointCloud pa(a), pb(b);
        CHECK(brute_force(pa, pb) < paired_cost(pa, pb));
        const auto rep = compare(pa, pb);
        CHECK(rep.epsilon_rel > 0.0);
        CHECK(rep.cost_ot == brute_force(pa, pb));
    }
}

TEST_CASE("compare: report invariants on random clouds") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + rng.below(100);
        const auto rep = compare(random_cloud(n, 2, rng), random_cloud(n, 2, rng));
        CHECK(rep.cost_ot <= rep.cost_encoder * (1 + 1e-12));
        CHECK(rep.epsilon_rel >= -1e-12);
        CHECK(is_permutation(rep.assignment));
    }
}

TEST_CASE("compare: failed rows are dropped from both clouds") {
    Rng rng(8);
    const auto x = random_cloud(6, 2, rng);
    auto y = x;
    y.points(2, 0) = std::numeric_limits<double>::quiet_NaN();
    const auto rep = compare(x, y, {false, false, true, false, false, false});
    CHECK(rep.n == 5);
    CHECK(rep.excluded == 1);
    CHECK(rep.epsilon_rel == 0.0);
    CHECK_THROWS_AS(compare(x, y, {true}), InvalidInput);
}

TEST_CASE("compare: degenerate denominator and invalid clouds") {
    RowMatrix a(2, 1), b(2, 1);
    a << 0, 1;
    b << 1, 0;
    CHECK_THROWS_AS(compare(PointCloud(a), PointCloud(b)), NumericalError);
    Rng rng(9);
    CHECK_THROWS_AS(ot_assignment(random_cloud(3, 2, rng), random_cloud(4, 2, rng)), InvalidInput);
    CHECK_THROWS_AS(ot_assignment(random_cloud(3, 2, rng), random_cloud(3, 3, rng)), InvalidInput);
    auto bad = random_cloud(3, 2, rng);
    bad.points(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(paired_cost(bad, random_cloud(3, 2, rng)), InvalidInput);
}

TEST_CASE("TransportReport JSON round trip uses the field names") {
    Rng rng(10);
    const auto rep = compare(random_cloud(12, 2, rng), random_cloud(12, 2, rng));
    nlohmann::json j = rep;
    for (const char* key : {"n", "cost_ot", "cost_encoder", "epsilon_rel", "assignment", "identity_fraction", "excluded", "timings"})
        CHECK(j.contains(key));
    const auto back = j.get<TransportReport>();
    CHECK(back.cost_ot == rep.cost_ot);
    CHECK(back.assignment == rep.assignment);
    CHECK(back.epsilon_rel == rep.epsilon_rel);
}

// Acceptance run: one PASS/FAIL line per criterion. Setting ACCEPTANCE_SCALE=ci
// skips the 100-density full-scale d = 2 suite (reported as SKIP, which fails).

#include "support.hpp"

#include "ddpmot/cheb.hpp"
#include "ddpmot/density.hpp"
#include "ddpmot/experiment.hpp"
#include "ddpmot/flow.hpp"
#include "ddpmot/fpe.hpp"
#include "ddpmot/gaussian.hpp"
#include "ddpmot/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

using namespace ddpmot;
using namespace testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;
double min_epsilon_seen = std::numeric_limits<double>::infinity();

void report(int id, bool pass, const std::string& detail) {
    failures += !pass;
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::filesystem::path out_dir(const std::string& name) {
    return std::filesystem::current_path() / "acceptance_runs" / name;
}

struct SuiteOutcome {
    bool ok = false;
    double max_eps = 0.0, seconds = 0.0;
    std::size_t failed = 0, completed = 0;
};

SuiteOutcome suite(ExperimentConfig c, const std::string& name) {
    c.out = out_dir(name).string();
    c.workers = 1;
    const auto t0 = Clock::now();
    const auto s = run_suite(c);
    SuiteOutcome o;
    o.seconds = seconds_since(t0);
    o.failed = s.failed;
    o.max_eps = s.max_epsilon_rel;
    o.completed = s.runs.size() - s.failed;
    o.ok = s.suite_ok && s.failed == 0;
    for (const auto& r : s.runs)
        if (r.ok) min_epsilon_seen = std::min(min_epsilon_seen, r.transport.epsilon_rel);
    std::printf("  %s: %zu/%zu completed, max eps_rel %.3e, %.1f s, summary %s/summary.json\n", name.c_str(), o.completed,
                s.runs.size(), o.max_eps, o.seconds, c.out.c_str());
    std::fflush(stdout);
    return o;
}

void gaussian_criteria() {
    ExperimentConfig c;
    c.out = out_dir("gaussian").string();
    const auto t0 = Clock::now();
    const auto rep = gaussian_check(c);
    const double total = seconds_since(t0);
    std::filesystem::create_directories(c.out);
    std::ofstream(std::filesystem::path(c.out) / "gaussian_check.json") << rep.json.dump(2) << '\n';
    report(1, rep.max_density_error <= 1e-4 && rep.fpe_seconds <= 60.0,
           fmt("max relative L2 density error %.3e over %zu snapshots (tol 1e-4), FPE solve %.1f s (limit 60 s)",
               rep.max_density_error, rep.density_errors.size(), rep.fpe_seconds));
    report(2, rep.map_discrepancy <= 1e-3 && rep.limit_discrepancy <= rep.limit_bound && total <= 120.0 && rep.failures == 0,
           fmt("finite-time map discrepancy %.3e (tol 1e-3), limit map discrepancy %.3e (bound %.3e), %.1f s (limit 120 s)",
               rep.map_discrepancy, rep.limit_discrepancy, rep.limit_bound, total));
}

void table_d2() {
    ExperimentConfig ci;
    ci.d = 2, ci.N = 128, ci.M = 128, ci.n_densities = 10;
    const auto small = suite(ci, "d2_ci");
    const bool ci_pass = small.ok && small.max_eps <= 1e-8 && small.seconds <= 1800.0;

    const char* scale = std::getenv("ACCEPTANCE_SCALE");
    if (scale != nullptr && std::string(scale) == "ci") {
        std::printf("criterion 3: SKIP  full-scale suite not run (ACCEPTANCE_SCALE=ci); CI variant max eps_rel %.3e in %.1f s\n",
                    small.max_eps, small.seconds);
        ++failures;
        return;
    }
    ExperimentConfig big;
    big.apply_preset("d2");
    big.n_densities = 100;
    const auto full = suite(big, "d2_full");
    const bool full_pass = full.ok && full.max_eps <= 1e-10;
    report(3, ci_pass && full_pass,
           fmt("full scale (N=250, M=250, 100 densities, 500 samples): max eps_rel %.3e (tol 1e-10), %zu failed, %.1f s/density; "
               "CI scale (N=128, M=128, 10 densities): max eps_rel %.3e (tol 1e-8) in %.1f s (limit 1800 s)",
               full.max_eps, full.failed, full.seconds / 100.0, small.max_eps, small.seconds));
}

void table_d3_d7() {
    ExperimentConfig d3;
    d3.apply_preset("d3");
    d3.n_densities = 10;
    const auto a = suite(d3, "d3");
    ExperimentConfig d7;
    d7.apply_preset("d7");
    d7.n_densities = 10;
    const auto b = suite(d7, "d7");
    report(4, a.ok && b.ok && a.max_eps <= 1e-8 && b.max_eps <= 1e-8,
           fmt("d=3 (N=100, M=100, quartic mixtures): max eps_rel %.3e; d=7 (N=50, M=50, random TT): max eps_rel %.3e (tol 1e-8)",
               a.max_eps, b.max_eps));
}

PointCloud random_cloud(std::size_t n, std::size_t d, Rng& rng) {
    PointCloud c(n, d);
    for (Eigen::Index i = 0; i < c.points.size(); ++i) c.points.data()[i] = rng.uniform(-2, 2);
    return c;
}

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

void exact_ot() {
    Rng rng(20240501);
    std::size_t mismatches = 0;
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(3);
        const auto x = random_cloud(n, d, rng), y = random_cloud(n, d, rng);
        const double got = ot_assignment(x, y).cost, want = brute_force(x, y);
        mismatches += got != want;
        worst = std::max(worst, std::abs(got - want));
    }
    const auto x = random_cloud(6, 2, rng);
    const auto same = ot_assignment(x, x);
    bool identity = same.cost == 0.0;
    for (std::size_t i = 0; i < 6; ++i) identity = identity && same.permutation[i] == i;
    RowMatrix a(2, 2), b(2, 2);
    a << 0, 0, 1, 0;
    b << 1, 0, 0, 0;
    const auto swap = ot_assignment(PointCloud(a), PointCloud(b));
    const bool swapped = swap.cost == 0.0 && swap.permutation == std::vector<std::size_t>{1, 0};
    report(5, mismatches == 0 && identity && swapped,
           fmt("200 instances (n <= 8): %zu cost mismatches, max |difference| %.1e; identity case %s, swap case %s", mismatches,
               worst, identity ? "exact" : "wrong", swapped ? "exact" : "wrong"));
}

std::vector<double> normal_1d(const ChebGrid& grid, double mean, double var) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::exp(-(grid.node(i) - mean) * (grid.node(i) - mean) / (2 * var)) / std::sqrt(2 * M_PI * var);
    return v;
}

double rel_l2(const TTTensor& p, const TTTensor& q, const ChebGrid& grid) {
    const auto& w = grid.quadrature();
    const double pp = tt_inner(p, p, w), qq = tt_inner(q, q, w), pq = tt_inner(p, q, w);
    return std::sqrt(std::max(pp - 2 * pq + qq, 0.0) / qq);
}

void properties() {
    std::vector<std::string> notes;
    bool pass = true;
    auto note = [&](bool ok, const std::string& s) {
        pass = pass && ok;
        notes.push_back((ok ? "" : "FAILED ") + s);
    };

    {   // TT algebra against dense oracles.
        Rng rng(1);
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t d = 2 + rng.below(2);
            std::vector<std::size_t> shape(d);
            for (auto& n : shape) n = 2 + rng.below(9);
            const auto a = random_tt(shape, 1 + rng.below(3), rng), b = random_tt(shape, 1 + rng.below(3), rng);
            const auto da = dense_of(a), db = dense_of(b);
            std::vector<double> sum(da.values.size()), prod(da.values.size());
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = da.values[i] + db.values[i], prod[i] = da.values[i] * db.values[i];
            worst = std::max({worst, rel_error(dense_of(tt_add(a, b)).values, sum), rel_error(dense_of(tt_hadamard(a, b)).values, prod)});
            const auto k = rng.below(d);
            const auto n = static_cast<Eigen::Index>(shape[k]);
            const Eigen::MatrixXd m = Eigen::MatrixXd::Random(n, n);
            worst = std::max(worst, rel_error(dense_of(tt_mode_apply(a, m, k)).values, dense_mode_apply(da, m, k).values));
            const auto dense = random_dense(shape, rng);
            worst = std::max(worst, rel_error(tt_to_dense(tt_from_dense(dense, 1e-13)).values, dense.values));
        }
        note(worst <= 1e-12, fmt("TT algebra vs dense %.1e", worst));
    }
    {   // Spectral differentiation and quadrature on polynomials of degree <= N - 2.
        Rng rng(2);
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 4 + rng.below(29), degree = rng.below(n - 1);
            std::vector<double> c(degree + 1);
            for (auto& v : c) v = rng.uniform(-1, 1);
            const auto x = cheb_nodes(n, -1, 1);
            Eigen::VectorXd f(static_cast<Eigen::Index>(n)), df(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                double v = 0, dv = 0;
                for (std::size_t k = degree + 1; k-- > 0;) dv = dv * x[i] + v, v = v * x[i] + c[k];
                f(static_cast<Eigen::Index>(i)) = v, df(static_cast<Eigen::Index>(i)) = dv;
            }
            worst = std::max(worst, (cheb_diff(n, -1, 1, 1) * f - df).cwiseAbs().maxCoeff() / std::max(1.0, df.cwiseAbs().maxCoeff()));
            const auto w = cc_weights(n, -1, 1);
            double q = 0, exact = 0;
            for (std::size_t i = 0; i < n; ++i) q += w[i] * f(static_cast<Eigen::Index>(i));
            for (std::size_t k = 0; k <= degree; k += 2) exact += 2 * c[k] / static_cast<double>(k + 1);
            worst = std::max(worst, std::abs(q - exact));
        }
        note(worst <= 1e-9, fmt("spectral exactness %.1e", worst));
    }
    {   // Mass conservation, stationarity and the score of N(0, I).
        const ChebGrid grid(2, 64, -8, 8);
        const auto p0 = TTTensor::rank_one({normal_1d(grid, 0, 1), normal_1d(grid, 0, 1)});
        const auto traj = fpe_solve(p0, grid, 50, 5.0);
        double stat = 0;
        for (const auto& s : traj.snapshots) stat = std::max(stat, rel_l2(s, p0, grid));
        note(stat <= 1e-5, fmt("N(0,I) stationarity %.1e", stat));

        const auto mix = gen_quartic_mixture(2, 31337);
        const auto cert = normalize_and_certify(DensityFunction([&](std::span<const double> x) { return mix(x); }), ChebGrid(2, 96, -8, 8));
        const auto mtraj = fpe_solve(cert.tensor, ChebGrid(2, 96, -8, 8), 48, 5.0);
        double mass = 0;
        for (const auto* t : {&traj, &mtraj})
            for (const auto& dgn : t->diagnostics) mass = std::max(mass, std::abs(dgn.mass_before_renorm - 1));
        note(mass <= 1e-6, fmt("mass defect per step %.1e", mass));

        Rng rng(3);
        double score = 0;
        for (int s = 0; s < 200; ++s) {
            const std::vector<double> x{rng.uniform(-5, 5), rng.uniform(-5, 5)};
            const auto g = score_at(traj, rng.below(51), x);
            score = std::max({score, std::abs(g[0] + x[0]), std::abs(g[1] + x[1])});
        }
        note(score <= 1e-4, fmt("N(0,I) score vs -x %.1e", score));
    }
    {   // Sampler moments at n = 2e4 within 3 sigma.
        const ChebGrid grid(2, 96, -8, 8);
        const std::size_t n = 20000;
        const auto x = sample_tt(TTTensor::rank_one({normal_1d(grid, 0.5, 1.5), normal_1d(grid, -1, 0.7)}), grid, n, 99);
        const Eigen::RowVector2d mean = x.points.colwise().mean();
        const RowMatrix centered = x.points.rowwise() - mean;
        const Eigen::Matrix2d cov = centered.transpose() * centered / static_cast<double>(n - 1);
        const double nn = static_cast<double>(n);
        const bool ok = std::abs(mean(0) - 0.5) <= 3 * std::sqrt(1.5 / nn) && std::abs(mean(1) + 1) <= 3 * std::sqrt(0.7 / nn) &&
                        std::abs(cov(0, 0) - 1.5) <= 3 * 1.5 * std::sqrt(2 / nn) && std::abs(cov(1, 1) - 0.7) <= 3 * 0.7 * std::sqrt(2 / nn) &&
                        std::abs(cov(0, 1)) <= 3 * std::sqrt(1.5 * 0.7 / nn);
        note(ok, fmt("sampler moments mean (%.4f, %.4f) var (%.4f, %.4f) cov %.4f", mean(0), mean(1), cov(0, 0), cov(1, 1), cov(0, 1)));
    }
    note(min_epsilon_seen >= -1e-12, fmt("min eps_rel over all suite runs %.1e", min_epsilon_seen));

    std::string joined;
    for (const auto& s : notes) joined += (joined.empty() ? "" : "; ") + s;
    report(6, pass, joined);
}

void fg_suite() {
    double f1 = 0, f0 = 0, g1 = 0;
    for (double t = 0; t <= 20; t += 0.25) {
        f1 = std::max(f1, std::abs(f_lambda(1, t) - 1));
        g1 = std::max(g1, std::abs(g_lambda(1, t) + (1 - std::exp(-t))));
    }
    double g0 = 0;
    for (double l : {0.1, 0.5, 1.0, 2.0, 4.0, 9.0}) f0 = std::max(f0, std::abs(f_lambda(l, 0) - 1)), g0 = std::max(g0, std::abs(g_lambda(l, 0)));
    const double f4 = std::abs(f_lambda(4, 10) - 0.5), g9 = std::abs(g_lambda(9, 20) + 1.0 / 3.0);
    report(7, f1 <= 1e-15 && f0 <= 1e-15 && f4 <= 1e-8 && g0 == 0.0 && g9 <= 1e-8 && g1 <= 1e-10,
           fmt("|f(1,t)-1| %.1e, |f(l,0)-1| %.1e, |f(4,10)-0.5| %.1e, |g(l,0)| %.1e, |g(9,20)+1/3| %.1e, |g(1,t)+(1-e^-t)| %.1e", f1, f0,
               f4, g0, g9, g1));
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    gaussian_criteria();
    table_d2();
    table_d3_d7();
    exact_ot();
    properties();
    fg_suite();
    std::printf("criterion 8: EXCLUDED  image-dataset experiments (DDPM training, inverted images) are out of scope; no check\n");
    std::printf("acceptance: %s (%d failing) in %.1f s\n", failures == 0 ? "PASS" : "FAIL", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}

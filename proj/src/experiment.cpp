#include "ddpmot/experiment.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace ddpmot {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

bool valid_family(const std::string& f) { return f == "quartic-mixture" || f == "tt-random" || f == "gaussian"; }

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<double> vector_of_eigen(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& value) {
    if (j.contains(key)) j.at(key).get_to(value);
}

}  // namespace

void ExperimentConfig::apply_preset(const std::string& name) {
    if (name == "d2") {
        d = 2, N = 250, M = 250, density_family = "quartic-mixture";
    } else if (name == "d3") {
        d = 3, N = 100, M = 100, density_family = "quartic-mixture";
    } else if (name == "d7") {
        d = 7, N = 50, M = 50, density_family = "tt-random";
    } else {
        throw InvalidInput("unknown preset '" + name + "' (expected d2, d3 or d7)");
    }
}

void ExperimentConfig::validate() const {
    if (d < 2) throw InvalidInput("config: d must be at least 2");
    if (N < 8) throw InvalidInput("config: N must be at least 8");
    if (M < 4) throw InvalidInput("config: M must be at least 4");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw InvalidInput("config: t_max must be positive");
    if (!(box_lower < 0.0 && 0.0 < box_upper)) throw InvalidInput("config: the box must contain the origin in its interior");
    if (n_samples < 1) throw InvalidInput("config: n_samples must be at least 1");
    if (n_densities < 1) throw InvalidInput("config: n_densities must be at least 1");
    if (!valid_family(density_family)) {
        throw InvalidInput("config: density_family must be quartic-mixture, tt-random or gaussian");
    }
    if (density_family == "quartic-mixture" && d > 3) throw InvalidInput("config: quartic-mixture requires d <= 3");
    if (workers < 1) throw InvalidInput("config: workers must be at least 1");
    for (double tol : {cross_tol, round_tol, density_cross_tol}) {
        if (!(tol > 0.0 && tol < 1.0)) throw InvalidInput("config: tolerances must lie in (0, 1)");
    }
    if (max_rank < 1 || density_max_rank < 1) throw InvalidInput("config: rank caps must be at least 1");
    parse_splitting(splitting);
    parse_convection(convection);
    if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) throw InvalidInput("config: failure_budget must lie in [0, 1]");
    if (!gaussian_mean.empty() && gaussian_mean.size() != d) throw InvalidInput("config: gaussian mean must have d entries");
    if (!gaussian_cov.empty()) {
        if (gaussian_cov.size() != d) throw InvalidInput("config: gaussian covariance must be d x d");
        for (const auto& row : gaussian_cov) {
            if (row.size() != d) throw InvalidInput("config: gaussian covariance must be d x d");
        }
    }
    if (density_index >= n_densities) throw InvalidInput("config: density_index must be below n_densities");
}

FpeOptions ExperimentConfig::fpe_options() const {
    FpeOptions o;
    o.round_tol = round_tol;
    o.max_rank = max_rank;
    o.cross_tol = cross_tol;
    o.splitting = parse_splitting(splitting);
    o.convection = parse_convection(convection);
    o.midpoints = midpoints;
    return o;
}

ChebGrid ExperimentConfig::grid() const { return ChebGrid(d, N, box_lower, box_upper); }

GaussianSpec ExperimentConfig::gaussian_spec() const {
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
    if (gaussian_mean.empty()) {
        mean(0) = 1.0;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) mean(i) = gaussian_mean[static_cast<std::size_t>(i)];
    }
    if (gaussian_cov.empty()) {
        cov(0, 0) = 2.0;
        cov(1, 1) = 0.5;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) cov(i, j) = gaussian_cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return GaussianSpec(mean, cov);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"d", c.d},
         {"N", c.N},
         {"M", c.M},
         {"t_max", c.t_max},
         {"box", {c.box_lower, c.box_upper}},
         {"n_samples", c.n_samples},
         {"n_densities", c.n_densities},
         {"density_family", c.density_family},
         {"seed", c.seed},
         {"workers", c.workers},
         {"out", c.out},
         {"cross_tol", c.cross_tol},
         {"round_tol", c.round_tol},
         {"max_rank", c.max_rank},
         {"density_cross_tol", c.density_cross_tol},
         {"density_max_rank", c.density_max_rank},
         {"splitting", c.splitting},
         {"convection", c.convection},
         {"midpoints", c.midpoints},
         {"failure_budget", c.failure_budget},
         {"mixture", {{"mean_range", c.mixture.mean_range},
                      {"q_scale", c.mixture.q_scale},
                      {"q_shift", c.mixture.q_shift},
                      {"q2_factor", c.mixture.q2_factor}}},
         {"gaussian", {{"mean", c.gaussian_mean}, {"cov", c.gaussian_cov}}},
         {"n_paths", c.n_paths},
         {"density_index", c.density_index}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (!j.is_object()) throw InvalidInput("config: expected a JSON object");
    try {
        read_if(j, "d", c.d);
        read_if(j, "N", c.N);
        read_if(j, "M", c.M);
        read_if(j, "t_max", c.t_max);
        if (j.contains("box")) {
            const auto box = j.at("box").get<std::vector<double>>();
            if (box.size() != 2) throw InvalidInput("config: box must be [lower, upper]");
            c.box_lower = box[0];
            c.box_upper = box[1];
        }
        read_if(j, "n_samples", c.n_samples);
        read_if(j, "n_densities", c.n_densities);
        read_if(j, "density_family", c.density_family);
        read_if(j, "seed", c.seed);
        read_if(j, "workers", c.workers);
        read_if(j, "out", c.out);
        read_if(j, "cross_tol", c.cross_tol);
        read_if(j, "round_tol", c.round_tol);
        read_if(j, "max_rank", c.max_rank);
        read_if(j, "density_cross_tol", c.density_cross_tol);
        read_if(j, "density_max_rank", c.density_max_rank);
        read_if(j, "splitting", c.splitting);
        read_if(j, "convection", c.convection);
        read_if(j, "midpoints", c.midpoints);
        read_if(j, "failure_budget", c.failure_budget);
        if (j.contains("mixture")) {
            const auto& m = j.at("mixture");
            read_if(m, "mean_range", c.mixture.mean_range);
            read_if(m, "q_scale", c.mixture.q_scale);
            read_if(m, "q_shift", c.mixture.q_shift);
            read_if(m, "q2_factor", c.mixture.q2_factor);
        }
        if (j.contains("gaussian")) {
            const auto& g = j.at("gaussian");
            read_if(g, "mean", c.gaussian_mean);
            read_if(g, "cov", c.gaussian_cov);
        }
        read_if(j, "n_paths", c.n_paths);
        read_if(j, "density_index", c.density_index);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
}

DensityRun run_density(const ExperimentConfig& config, std::size_t index, std::vector<FlowPath>* paths) {
    const auto start = Clock::now();
    DensityRun run;
    run.index = index;
    run.seed = derive_seed(config.seed, index);
    const ChebGrid grid = config.grid();
    const double center = 0.5 * (config.box_lower + config.box_upper);

    CertifyOptions certify;
    certify.cross_tol = config.density_cross_tol;
    certify.cross_max_rank = config.density_max_rank;

    nlohmann::json details;
    nlohmann::json timings;
    CertifiedDensity density;
    std::optional<GaussianSpec> gaussian;
    auto t0 = Clock::now();
    if (config.density_family == "quartic-mixture") {
        const MixtureSpec mix = gen_quartic_mixture(config.d, run.seed, config.mixture, {config.box_lower, config.box_upper});
        details["mixture"] = mix;
        density = normalize_and_certify(DensityFunction([&mix](std::span<const double> x) { return mix(x); }), grid, certify);
    } else if (config.density_family == "tt-random") {
        density = normalize_and_certify(gen_tt_random(config.d, run.seed, grid), grid, certify);
    } else {
        const bool fixed = !config.gaussian_mean.empty() || !config.gaussian_cov.empty();
        const GaussianSpec spec = fixed ? config.gaussian_spec() : gen_gaussian(config.d, run.seed);
        density = normalize_and_certify(spec, grid, certify);
        gaussian = rescaled(spec, density.scale, center);
    }
    timings["generate_seconds"] = seconds_since(t0);
    details["certificate"] = {{"scale", density.scale},
                              {"rescales", density.rescales},
                              {"boundary_ratio", density.boundary_ratio},
                              {"cross_error", density.cross_error},
                              {"cross_rank_capped", density.cross_rank_capped},
                              {"initial_ranks", density.tensor.ranks()}};

    t0 = Clock::now();
    const DensityTrajectory traj = fpe_solve(density.tensor, grid, config.M, config.t_max, config.fpe_options());
    timings["fpe_seconds"] = seconds_since(t0);
    double worst_mass = 0.0, worst_negative = 0.0;
    std::size_t peak_rank = 0;
    for (const auto& s : traj.diagnostics) {
        worst_mass = std::max(worst_mass, std::abs(s.mass_before_renorm - 1.0));
        if (s.max_value > 0.0) worst_negative = std::min(worst_negative, s.min_value / s.max_value);
        peak_rank = std::max(peak_rank, *std::max_element(s.ranks.begin(), s.ranks.end()));
    }
    details["fpe"] = {{"cross_warnings", traj.cross_warnings},
                      {"max_rank", peak_rank},
                      {"final_ranks", traj.snapshots.back().ranks()},
                      {"max_mass_defect", worst_mass},
                      {"most_negative_relative_value", worst_negative}};

    t0 = Clock::now();
    const PointCloud x0 = sample_tt(density.tensor, grid, config.n_samples, derive_seed(run.seed, 1));
    timings["sample_seconds"] = seconds_since(t0);

    t0 = Clock::now();
    FlowOptions fo;
    fo.record_paths = paths != nullptr;
    FlowResult flow = flow_integrate(traj, x0, fo);
    timings["flow_seconds"] = seconds_since(t0);
    details["flow"] = {{"clamped", flow.clamped}, {"floor_hits", flow.floor_hits}, {"failures", flow.failures()}};
    if (paths) *paths = std::move(flow.paths);

    if (gaussian) {
        double worst = 0.0;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            if (flow.failed[i]) continue;
            const auto p = x0.point(i);
            const auto q = flow.x1.point(i);
            const Eigen::VectorXd exact = finite_time_map(*gaussian, Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())), config.t_max);
            const Eigen::VectorXd got = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
            worst = std::max(worst, (got - exact).norm());
        }
        details["gaussian"] = {{"mean", vector_of_eigen(gaussian->mean())}, {"map_discrepancy", worst}};
    }

    t0 = Clock::now();
    run.transport = compare(x0, flow.x1, flow.failed);
    timings["compare_seconds"] = seconds_since(t0);
    run.ok = true;
    run.details = std::move(details);
    run.seconds = seconds_since(start);
    timings["total_seconds"] = run.seconds;
    run.details["timings"] = std::move(timings);
    return run;
}

namespace {

nlohmann::json run_record(const DensityRun& r) {
    nlohmann::json j = {{"index", r.index}, {"seed", r.seed}, {"ok", r.ok}};
    if (r.ok) {
        j["epsilon_rel"] = r.transport.epsilon_rel;
        j["cost_ot"] = r.transport.cost_ot;
        j["cost_encoder"] = r.transport.cost_encoder;
        j["identity_fraction"] = r.transport.identity_fraction;
        j["excluded"] = r.transport.excluded;
    } else {
        j["error"] = r.error;
    }
    return j;
}

}  // namespace

SuiteSummary run_suite(const ExperimentConfig& config, bool write_files) {
    config.validate();
    const auto start = Clock::now();
    const std::filesystem::path out = config.out;
    if (write_files) std::filesystem::create_directories(out);

    SuiteSummary summary;
    summary.runs.resize(config.n_densities);
    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&]() {
        for (std::size_t i = next++; i < config.n_densities; i = next++) {
            DensityRun run;
            try {
                run = run_density(config, i);
            } catch (const std::exception& e) {
                run = DensityRun{};
                run.index = i;
                run.seed = derive_seed(config.seed, i);
                run.ok = false;
                run.error = e.what();
            }
            if (write_files) {
                nlohmann::json j = {{"config", config}, {"index", run.index}, {"seed", run.seed}, {"ok", run.ok}};
                if (run.ok) {
                    j["transport"] = run.transport;
                    j["details"] = run.details;
                } else {
                    j["error"] = run.error;
                }
                char name[64];
                std::snprintf(name, sizeof(name), "density_%04zu.json", i);
                write_json(out / name, j);
            }
            {
                std::lock_guard lock(io);
                summary.runs[i] = std::move(run);
            }
        }
    };
    const std::size_t workers = std::min(config.workers, config.n_densities);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    std::vector<double> eps;
    nlohmann::json records = nlohmann::json::array();
    nlohmann::json failures = nlohmann::json::array();
    std::vector<double> per_run;
    for (const auto& r : summary.runs) {
        records.push_back(run_record(r));
        per_run.push_back(r.seconds);
        if (r.ok) {
            eps.push_back(r.transport.epsilon_rel);
        } else {
            ++summary.failed;
            failures.push_back({{"index", r.index}, {"seed", r.seed}, {"error", r.error}});
        }
    }
    std::sort(eps.begin(), eps.end());
    if (!eps.empty()) {
        summary.max_epsilon_rel = eps.back();
        const std::size_t h = eps.size() / 2;
        summary.median_epsilon_rel = eps.size() % 2 ? eps[h] : 0.5 * (eps[h - 1] + eps[h]);
    }
    summary.suite_ok = !eps.empty() &&
                       static_cast<double>(summary.failed) <= config.failure_budget * static_cast<double>(config.n_densities);

    double total = 0.0;
    for (double t : per_run) total += t;
    summary.json = {{"config", config},
                    {"n_densities", config.n_densities},
                    {"completed", eps.size()},
                    {"failed", summary.failed},
                    {"suite_ok", summary.suite_ok},
                    {"max_epsilon_rel", summary.max_epsilon_rel},
                    {"median_epsilon_rel", summary.median_epsilon_rel},
                    {"min_epsilon_rel", eps.empty() ? 0.0 : eps.front()},
                    {"runs", records},
                    {"failures", failures},
                    {"timings", {{"per_run_seconds", per_run},
                                 {"mean_seconds", per_run.empty() ? 0.0 : total / static_cast<double>(per_run.size())},
                                 {"wall_seconds", seconds_since(start)}}}};
    if (write_files) write_json(out / "summary.json", summary.json);
    return summary;
}

GaussianCheckReport gaussian_check(const ExperimentConfig& config) {
    config.validate();
    const GaussianSpec spec = config.gaussian_spec();
    const ChebGrid grid = config.grid();
    GaussianCheckReport rep;

    TTTensor p0 = gaussian_tensor(spec, grid);
    p0 = tt_scale(p0, 1.0 / tt_integrate(p0, grid.quadrature()));
    auto t0 = Clock::now();
    const DensityTrajectory traj = fpe_solve(p0, grid, config.M, config.t_max, config.fpe_options());
    rep.fpe_seconds = seconds_since(t0);

    const auto& w = grid.quadrature();
    for (std::size_t m = 0; m <= traj.steps; ++m) {
        const GaussianMoments mo = moments_at(spec, traj.time(m));
        const TTTensor ref = gaussian_tensor(GaussianSpec(mo.mean, mo.covariance), grid);
        const TTTensor diff = tt_add(traj.snapshots[m], tt_scale(ref, -1.0));
        const double err = std::sqrt(std::max(0.0, tt_inner(diff, diff, w))) / std::sqrt(tt_inner(ref, ref, w));
        rep.density_errors.push_back(err);
        rep.max_density_error = std::max(rep.max_density_error, err);
    }

    const PointCloud x0 = sample_tt(p0, grid, config.n_samples, derive_seed(config.seed, 1));
    t0 = Clock::now();
    FlowOptions fo;
    fo.workers = config.workers;
    const FlowResult flow = flow_integrate(traj, x0, fo);
    rep.flow_seconds = seconds_since(t0);
    rep.failures = flow.failures();
    rep.clamped = flow.clamped;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (flow.failed[i]) continue;
        const auto p = x0.point(i);
        const auto q = flow.x1.point(i);
        const Eigen::Map<const Eigen::VectorXd> x(p.data(), static_cast<Eigen::Index>(p.size()));
        const Eigen::Map<const Eigen::VectorXd> y(q.data(), static_cast<Eigen::Index>(q.size()));
        rep.map_discrepancy = std::max(rep.map_discrepancy, (y - finite_time_map(spec, x, config.t_max)).norm());
        rep.limit_discrepancy = std::max(rep.limit_discrepancy, (y - encoder_map(spec, x)).norm());
    }
    const auto n = spec.covariance().rows();
    const Eigen::MatrixXd offset = spec.covariance() - Eigen::MatrixXd::Identity(n, n);
    const double offset_norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(offset).eigenvalues().cwiseAbs().maxCoeff();
    rep.limit_bound = std::exp(-config.t_max) * offset_norm + 1e-3;
    rep.epsilon_rel = compare(x0, flow.x1, flow.failed).epsilon_rel;

    rep.json = {{"config", config},
                {"max_density_error", rep.max_density_error},
                {"density_errors", rep.density_errors},
                {"map_discrepancy", rep.map_discrepancy},
                {"limit_discrepancy", rep.limit_discrepancy},
                {"limit_bound", rep.limit_bound},
                {"epsilon_rel", rep.epsilon_rel},
                {"failures", rep.failures},
                {"clamped", rep.clamped},
                {"timings", {{"fpe_seconds", rep.fpe_seconds}, {"flow_seconds", rep.flow_seconds}}}};
    return rep;
}

TrajectoryDump dump_trajectories(const ExperimentConfig& config, bool write_files) {
    config.validate();
    std::vector<FlowPath> all;
    const DensityRun run = run_density(config, config.density_index, &all);
    (void)run;

    std::vector<std::size_t> ids(all.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    Rng rng(derive_seed(config.seed, 0x9a7b));
    const std::size_t take = std::min(config.n_paths, ids.size());
    for (std::size_t i = 0; i < take; ++i) std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
    ids.resize(take);
    std::sort(ids.begin(), ids.end());

    TrajectoryDump dump;
    for (auto id : ids) dump.paths.push_back(std::move(all[id]));
    if (!dump.paths.empty()) dump.straightness = straightness_diagnostic(dump.paths);

    if (write_files) {
        const std::filesystem::path out = config.out;
        std::filesystem::create_directories(out);
        std::ofstream csv(out / "trajectories.csv");
        write_paths_csv(csv, dump.paths, config.d);
        std::ofstream st(out / "straightness.csv");
        st << "id,straightness\n";
        st.precision(17);
        for (std::size_t i = 0; i < dump.paths.size(); ++i) st << dump.paths[i].id << ',' << dump.straightness[i] << '\n';
    }
    return dump;
}

std::vector<TableRow> load_table(const std::vector<std::filesystem::path>& summaries) {
    std::vector<TableRow> rows;
    for (const auto& path : summaries) {
        std::ifstream in(path);
        if (!in) throw InvalidInput("table: cannot read " + path.string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
            TableRow r;
            const auto& c = j.at("config");
            c.at("d").get_to(r.d);
            c.at("N").get_to(r.N);
            c.at("M").get_to(r.M);
            c.at("density_family").get_to(r.family);
            j.at("n_densities").get_to(r.densities);
            j.at("completed").get_to(r.completed);
            j.at("max_epsilon_rel").get_to(r.max_epsilon_rel);
            j.at("median_epsilon_rel").get_to(r.median_epsilon_rel);
            j.at("timings").at("mean_seconds").get_to(r.mean_seconds);
            rows.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput("table: " + path.string() + ": " + e.what());
        }
    }
    std::sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) { return a.d < b.d; });
    return rows;
}

std::string table_csv(const std::vector<TableRow>& rows) {
    std::ostringstream out;
    out << "d,N,M,family,densities,completed,max_epsilon_rel,median_epsilon_rel,mean_seconds\n";
    out.precision(3);
    for (const auto& r : rows) {
        out << r.d << ',' << r.N << ',' << r.M << ',' << r.family << ',' << r.densities << ',' << r.completed << ','
            << std::scientific << r.max_epsilon_rel << ',' << r.median_epsilon_rel << std::defaultfloat << ','
            << r.mean_seconds << '\n';
    }
    return out.str();
}

std::string table_markdown(const std::vector<TableRow>& rows) {
    std::ostringstream out;
    out << "| d | N | M | family | densities | max eps_rel | median eps_rel | mean time (s) |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    out.precision(2);
    for (const auto& r : rows) {
        out << "| " << r.d << " | " << r.N << " | " << r.M << " | " << r.family << " | " << r.completed << '/'
            << r.densities << " | " << std::scientific << r.max_epsilon_rel << " | " << r.median_epsilon_rel << " | "
            << std::fixed << std::setprecision(1) << r.mean_seconds << std::defaultfloat << " |\n";
    }
    return out.str();
}

}  // namespace ddpmot

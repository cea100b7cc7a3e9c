#pragma once

#include "ddpmot/density.hpp"
#include "ddpmot/fpe.hpp"
#include "ddpmot/flow.hpp"
#include "ddpmot/transport.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ddpmot {

struct ExperimentConfig {
    std::size_t d = 2;
    std::size_t N = 128;
    std::size_t M = 128;
    double t_max = 5.0;
    double box_lower = -8.0;
    double box_upper = 8.0;
    std::size_t n_samples = 500;
    std::size_t n_densities = 100;
    std::string density_family = "quartic-mixture";
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string out = "runs";

    double cross_tol = 1e-10;
    double round_tol = 1e-10;
    std::size_t max_rank = 50;
    double density_cross_tol = 1e-8;
    std::size_t density_max_rank = 30;
    std::string splitting = "exact_ou";
    std::string convection = "cross";
    bool midpoints = true;
    double failure_budget = 0.1;
    MixtureLaw mixture;

    /// Gaussian used by gaussian-check; empty means a0 = (1, 0, ...), Sigma0 = diag(2, 0.5, 1, ...).
    /// When either is set, the gaussian family uses it for every density instead of random draws.
    std::vector<double> gaussian_mean;
    std::vector<std::vector<double>> gaussian_cov;
    std::size_t n_paths = 10;
    std::size_t density_index = 0;

    /// Reference (d, N, M) grids with their density family: d2, d3, d7.
    void apply_preset(const std::string& name);
    /// Throws InvalidInput on the first violated constraint.
    void validate() const;
    FpeOptions fpe_options() const;
    ChebGrid grid() const;
    GaussianSpec gaussian_spec() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep the values already in c, so files can be partial.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct DensityRun {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    TransportReport transport;
    nlohmann::json details;
    double seconds = 0.0;
};

struct SuiteSummary {
    std::vector<DensityRun> runs;
    std::size_t failed = 0;
    double max_epsilon_rel = 0.0;
    double median_epsilon_rel = 0.0;
    bool suite_ok = true;
    nlohmann::json json;
};

/// One density through generate, certify, solve, sample, transport, compare.
/// When `paths` is given, every point's flow path is recorded into it.
DensityRun run_density(const ExperimentConfig& config, std::size_t index, std::vector<FlowPath>* paths = nullptr);

/// All densities, writing density_XXXX.json per run and summary.json to config.out.
SuiteSummary run_suite(const ExperimentConfig& config, bool write_files = true);

struct GaussianCheckReport {
    std::vector<double> density_errors;
    double max_density_error = 0.0;
    double map_discrepancy = 0.0;
    double limit_discrepancy = 0.0;
    double limit_bound = 0.0;
    double epsilon_rel = 0.0;
    std::size_t failures = 0;
    std::size_t clamped = 0;
    double fpe_seconds = 0.0;
    double flow_seconds = 0.0;
    nlohmann::json json;
};

/// The pipeline on config.gaussian_spec() against the closed forms. No
/// boundary certificate is applied, so the Gaussian is used exactly as given.
GaussianCheckReport gaussian_check(const ExperimentConfig& config);

/// Paths of n_paths random points of density config.density_index, with a
/// straightness value per path. Writes trajectories.csv and straightness.csv.
struct TrajectoryDump {
    std::vector<FlowPath> paths;
    std::vector<double> straightness;
};
TrajectoryDump dump_trajectories(const ExperimentConfig& config, bool write_files = true);

/// One row per suite (d, N, M, family, eps_rel statistics) from summary.json files.
struct TableRow {
    std::size_t d = 0, N = 0, M = 0;
    std::string family;
    std::size_t densities = 0, completed = 0;
    double max_epsilon_rel = 0.0, median_epsilon_rel = 0.0, mean_seconds = 0.0;
};
std::vector<TableRow> load_table(const std::vector<std::filesystem::path>& summaries);
std::string table_csv(const std::vector<TableRow>& rows);
std::string table_markdown(const std::vector<TableRow>& rows);

}  // namespace ddpmot

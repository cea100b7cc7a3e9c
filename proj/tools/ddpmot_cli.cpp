// Command-line front end: suite runs, Gaussian oracle checks, trajectory dumps
// and aggregation of suite summaries into a results table.

#include "ddpmot/error.hpp"
#include "ddpmot/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kValidation = 2;
constexpr int kSuiteFailure = 3;

struct Overrides {
    std::optional<std::size_t> dim, grid, steps, samples, densities, workers, paths, index;
    std::optional<double> t_max;
    std::vector<double> box;
    std::optional<std::string> family, out, preset, config;
    std::optional<std::uint64_t> seed;
    std::vector<double> mean;
};

void add_experiment_flags(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "JSON config file; explicit flags override it");
    app->add_option("--preset", o.preset, "Reference grid preset")->check(CLI::IsMember({"d2", "d3", "d7"}));
    app->add_option("--dim", o.dim, "Dimension d");
    app->add_option("--grid", o.grid, "Chebyshev nodes per mode (N)");
    app->add_option("--steps", o.steps, "Time steps (M)");
    app->add_option("--t-max", o.t_max, "Final time");
    app->add_option("--box", o.box, "Box as two numbers: lower upper")->expected(2);
    app->add_option("--samples", o.samples, "Samples per density");
    app->add_option("--densities", o.densities, "Number of random densities");
    app->add_option("--family", o.family, "Density family")
        ->check(CLI::IsMember({"quartic-mixture", "tt-random", "gaussian"}));
    app->add_option("--seed", o.seed, "Master seed");
    app->add_option("--workers", o.workers, "Worker threads");
    app->add_option("--out", o.out, "Output directory");
}

ddpmot::ExperimentConfig resolve(const Overrides& o) {
    ddpmot::ExperimentConfig c;
    if (o.config) {
        std::ifstream in(*o.config);
        if (!in) throw ddpmot::InvalidInput("cannot open config file " + *o.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ddpmot::InvalidInput(std::string("config file: ") + e.what());
        }
        ddpmot::from_json(j, c);
    }
    if (o.preset) c.apply_preset(*o.preset);
    if (o.dim) c.d = *o.dim;
    if (o.grid) c.N = *o.grid;
    if (o.steps) c.M = *o.steps;
    if (o.t_max) c.t_max = *o.t_max;
    if (!o.box.empty()) c.box_lower = o.box[0], c.box_upper = o.box[1];
    if (o.samples) c.n_samples = *o.samples;
    if (o.densities) c.n_densities = *o.densities;
    if (o.family) c.density_family = *o.family;
    if (o.seed) c.seed = *o.seed;
    if (o.workers) c.workers = *o.workers;
    if (o.out) c.out = *o.out;
    if (o.paths) c.n_paths = *o.paths;
    if (o.index) c.density_index = *o.index;
    if (!o.mean.empty()) c.gaussian_mean = o.mean;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probability-flow encoder versus optimal transport on tensor-train densities"};
    app.require_subcommand(1);

    Overrides run_o, gauss_o, traj_o;
    auto* run = app.add_subcommand("run", "Run a suite of random densities and write per-density and summary reports");
    add_experiment_flags(run, run_o);

    auto* gauss = app.add_subcommand("gaussian-check", "Compare the pipeline on a Gaussian with the closed-form solution");
    add_experiment_flags(gauss, gauss_o);
    gauss->add_option("--mean", gauss_o.mean, "Initial mean a0 (d numbers)");

    auto* traj = app.add_subcommand("trajectories", "Dump flow paths and their straightness for one density");
    add_experiment_flags(traj, traj_o);
    traj->add_option("--paths", traj_o.paths, "Number of paths to dump");
    traj->add_option("--index", traj_o.index, "Density index within the suite");

    std::vector<std::string> summaries;
    std::optional<std::string> table_out;
    auto* table = app.add_subcommand("table", "Aggregate summary.json files into a CSV and markdown results table");
    table->add_option("summaries", summaries, "summary.json files")->required()->check(CLI::ExistingFile);
    table->add_option("--out", table_out, "Directory for table.csv and table.md (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (*run) {
            const auto config = resolve(run_o);
            const auto summary = ddpmot::run_suite(config);
            std::cout << "densities " << config.n_densities << ", failed " << summary.failed << ", max eps_rel "
                      << summary.max_epsilon_rel << ", median eps_rel " << summary.median_epsilon_rel << '\n'
                      << "summary: " << (std::filesystem::path(config.out) / "summary.json").string() << '\n';
            return summary.suite_ok ? kOk : kSuiteFailure;
        }
        if (*gauss) {
            auto config = resolve(gauss_o);
            const auto rep = ddpmot::gaussian_check(config);
            std::filesystem::create_directories(config.out);
            std::ofstream(std::filesystem::path(config.out) / "gaussian_check.json") << rep.json.dump(2) << '\n';
            std::cout << "max density L2 error " << rep.max_density_error << '\n'
                      << "max map discrepancy " << rep.map_discrepancy << '\n'
                      << "max limit discrepancy " << rep.limit_discrepancy << " (bound " << rep.limit_bound << ")\n"
                      << "eps_rel " << rep.epsilon_rel << '\n';
            return kOk;
        }
        if (*traj) {
            const auto config = resolve(traj_o);
            const auto dump = ddpmot::dump_trajectories(config);
            std::cout << "wrote " << dump.paths.size() << " paths to "
                      << (std::filesystem::path(config.out) / "trajectories.csv").string() << '\n';
            return kOk;
        }
        if (*table) {
            std::vector<std::filesystem::path> paths(summaries.begin(), summaries.end());
            const auto rows = ddpmot::load_table(paths);
            const auto csv = ddpmot::table_csv(rows);
            const auto md = ddpmot::table_markdown(rows);
            if (table_out) {
                std::filesystem::create_directories(*table_out);
                std::ofstream(std::filesystem::path(*table_out) / "table.csv") << csv;
                std::ofstream(std::filesystem::path(*table_out) / "table.md") << md;
            } else {
                std::cout << md;
            }
            return kOk;
        }
    } catch (const ddpmot::InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

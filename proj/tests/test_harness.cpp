#include "ddpmot/error.hpp"
#include "ddpmot/experiment.hpp"
#include "ddpmot/gaussian.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ddpmot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ddpmot_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig c;
    c.d = 2;
    c.N = 48;
    c.M = 16;
    c.n_samples = 60;
    c.n_densities = 3;
    c.seed = 2024;
    c.out = out.string();
    return c;
}

void strip_timings(nlohmann::json& j) {
    if (j.is_object()) {
        j.erase("timings");
        for (auto& [key, value] : j.items()) strip_timings(value);
    } else if (j.is_array()) {
        for (auto& v : j) strip_timings(v);
    }
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(DDPMOT_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("presets match the published (d, N, M) triples") {
    ExperimentConfig c;
    c.apply_preset("d2");
    CHECK((c.d == 2 && c.N == 250 && c.M == 250 && c.density_family == "quartic-mixture"));
    c.apply_preset("d3");
    CHECK((c.d == 3 && c.N == 100 && c.M == 100 && c.density_family == "quartic-mixture"));
    c.apply_preset("d7");
    CHECK((c.d == 7 && c.N == 50 && c.M == 50 && c.density_family == "tt-random"));
    CHECK_THROWS_AS(c.apply_preset("d5"), InvalidInput);
}

TEST_CASE("config defaults and validation") {
    ExperimentConfig c;
    CHECK(c.t_max == 5.0);
    CHECK(c.box_lower == -8.0);
    CHECK(c.box_upper == 8.0);
    CHECK(c.n_samples == 500);
    CHECK(c.n_densities == 100);
    CHECK_NOTHROW(c.validate());
    auto bad = [&](auto mutate) {
        ExperimentConfig b;
        mutate(b);
        CHECK_THROWS_AS(b.validate(), InvalidInput);
    };
    bad([](ExperimentConfig& b) { b.d = 1; });
    bad([](ExperimentConfig& b) { b.N = 7; });
    bad([](ExperimentConfig& b) { b.M = 3; });
    bad([](ExperimentConfig& b) { b.t_max = 0; });
    bad([](ExperimentConfig& b) { b.d = 4; });
    bad([](ExperimentConfig& b) { b.density_family = "uniform"; });
    bad([](ExperimentConfig& b) { b.box_lower = 1; });
    bad([](ExperimentConfig& b) { b.cross_tol = 2; });
    bad([](ExperimentConfig& b) { b.splitting = "lie"; });
    bad([](ExperimentConfig& b) { b.gaussian_mean = {1, 2, 3}; });
    ExperimentConfig ok;
    ok.d = 7;
    ok.density_family = "tt-random";
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config JSON round trip and partial merge") {
    ExperimentConfig c = small_config("x");
    c.mixture.q2_factor = 0.07;
    nlohmann::json j = c;
    ExperimentConfig back;
    from_json(j, back);
    CHECK(nlohmann::json(back).dump() == j.dump());

    ExperimentConfig merged = small_config("y");
    from_json(nlohmann::json{{"N", 64}, {"box", {-6, 6}}}, merged);
    CHECK(merged.N == 64);
    CHECK(merged.box_upper == 6);
    CHECK(merged.M == 16);
    CHECK_THROWS_AS(from_json(nlohmann::json{{"N", "many"}}, merged), InvalidInput);
}

TEST_CASE("run_suite: reports, config echo, reproducible summary") {
    const auto out = scratch("suite");
    const auto c = small_config(out);
    const auto s = run_suite(c);
    CHECK(s.suite_ok);
    CHECK(s.failed == 0);
    CHECK(s.runs.size() == 3);
    CHECK(s.max_epsilon_rel <= 1e-8);
    for (const auto& r : s.runs) {
        CHECK(r.ok);
        CHECK(r.transport.epsilon_rel >= -1e-12);
        CHECK(r.transport.n == 60);
    }
    const auto summary = read_json(out / "summary.json");
    CHECK(summary["config"] == nlohmann::json(c));
    CHECK(summary.contains("max_epsilon_rel"));
    CHECK(summary.contains("median_epsilon_rel"));
    CHECK(summary["timings"]["per_run_seconds"].size() == 3);
    for (int i = 0; i < 3; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "density_%04d.json", i);
        const auto rep = read_json(out / name);
        CHECK(rep["config"] == nlohmann::json(c));
        for (const char* key : {"n", "cost_ot", "cost_encoder", "epsilon_rel", "assignment", "identity_fraction", "excluded"})
            CHECK(rep["transport"].contains(key));
    }

    auto first = summary;
    run_suite(c);
    auto second = read_json(out / "summary.json");
    strip_timings(first);
    strip_timings(second);
    CHECK(first.dump() == second.dump());
    fs::remove_all(out);
}

TEST_CASE("run_suite: gaussian family matches the finite-time map") {
    auto c = small_config(scratch("gauss_suite"));
    c.density_family = "gaussian";
    c.N = 64;
    c.M = 64;
    const auto s = run_suite(c, false);
    REQUIRE(s.suite_ok);
    for (const auto& r : s.runs) {
        CHECK(r.transport.epsilon_rel <= 1e-10);
        CHECK(r.details["gaussian"]["map_discrepancy"].get<double>() <= 1e-4);
    }
    c.d = 3;
    c.n_densities = 1;
    const auto s3 = run_suite(c, false);
    REQUIRE(s3.suite_ok);
    CHECK(s3.runs[0].transport.epsilon_rel <= 1e-10);
    CHECK(s3.runs[0].details["gaussian"]["map_discrepancy"].get<double>() <= 1e-4);
}

TEST_CASE("gaussian_check: stationary, shifted and anisotropic examples") {
    ExperimentConfig c;
    c.N = 96;
    c.M = 64;
    c.n_samples = 200;
    c.gaussian_mean = {0, 0};
    c.gaussian_cov = {{1, 0}, {0, 1}};
    CHECK(gaussian_check(c).map_discrepancy <= 1e-6);

    c.gaussian_mean = {1, 0};
    auto shifted = gaussian_check(c);
    CHECK(shifted.map_discrepancy <= 1e-4);
    CHECK(shifted.epsilon_rel <= 1e-10);

    c.gaussian_mean = {0, 0};
    c.gaussian_cov = {{2, 0}, {0, 0.5}};
    const auto aniso = gaussian_check(c);
    CHECK(aniso.map_discrepancy <= 1e-4);
    CHECK(aniso.limit_discrepancy <= aniso.limit_bound);
    CHECK(aniso.density_errors.size() == c.M + 1);
}

TEST_CASE("dump_trajectories: empty, stationary, bent mixture paths") {
    auto c = small_config(scratch("traj"));
    c.n_paths = 0;
    auto empty = dump_trajectories(c);
    CHECK(empty.paths.empty());
    CHECK(read_text(fs::path(c.out) / "trajectories.csv") == "id,t,x_1,x_2\n");

    c.density_family = "gaussian";
    c.gaussian_mean = {0, 0};
    c.gaussian_cov = {{1, 0}, {0, 1}};
    c.N = 64;
    c.n_paths = 8;
    const auto still = dump_trajectories(c, false);
    REQUIRE(still.straightness.size() == 8);
    for (double s : still.straightness) CHECK(s == 0.0);

    c = small_config(scratch("traj_mix"));
    c.n_paths = 20;
    const auto mix = dump_trajectories(c);
    CHECK(mix.paths.size() == 20);
    CHECK(*std::max_element(mix.straightness.begin(), mix.straightness.end()) > 1e-3);
    const auto csv = read_text(fs::path(c.out) / "trajectories.csv");
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == 1 + 20 * (c.M + 1));
    CHECK(fs::exists(fs::path(c.out) / "straightness.csv"));
}

TEST_CASE("table aggregation") {
    const auto out = scratch("table");
    auto c = small_config(out / "a");
    c.n_densities = 2;
    run_suite(c);
    const auto rows = load_table({out / "a" / "summary.json"});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].d == 2);
    CHECK(rows[0].N == 48);
    CHECK(rows[0].completed == 2);
    const auto csv = table_csv(rows);
    CHECK(csv.find("max_epsilon_rel") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(table_markdown(rows).find("| 2 |") != std::string::npos);
    CHECK_THROWS_AS(load_table({out / "missing.json"}), InvalidInput);
}

TEST_CASE("CLI exit codes and flag precedence") {
    const auto out = scratch("cli");
    const std::string tiny = "--grid 24 --steps 4 --samples 12 --densities 1 --t-max 1";
    CHECK(cli("") == 2);
    CHECK(cli("run --bogus") == 2);
    CHECK(cli("run --dim 1 --out " + (out / "a").string()) == 2);
    CHECK(cli("run --dim 4 --family quartic-mixture --out " + (out / "a").string()) == 2);
    CHECK(cli("run --preset d9") == 2);
    CHECK(cli("run --config " + (out / "none.json").string()) == 2);
    {
        std::ofstream(out / "broken.json") << "{ not json";
    }
    CHECK(cli("run --config " + (out / "broken.json").string()) == 2);

    CHECK(cli("run " + tiny + " --out " + (out / "ok").string()) == 0);
    CHECK(fs::exists(out / "ok" / "summary.json"));

    // The certificate cannot be met on a tiny box, so every density fails.
    CHECK(cli("run --grid 24 --steps 4 --samples 12 --densities 2 --t-max 1 --box -0.5 0.5 --out " + (out / "fail").string()) == 3);

    {
        std::ofstream(out / "cfg.json") << R"({"N": 20, "M": 6, "n_samples": 10, "n_densities": 1, "t_max": 0.5, "seed": 9})";
    }
    CHECK(cli("run --config " + (out / "cfg.json").string() + " --grid 26 --out " + (out / "cfg").string()) == 0);
    const auto echoed = read_json(out / "cfg" / "summary.json")["config"];
    CHECK(echoed["N"] == 26);
    CHECK(echoed["M"] == 6);
    CHECK(echoed["seed"] == 9);

    CHECK(cli("gaussian-check --grid 32 --steps 8 --samples 20 --out " + (out / "g").string()) == 0);
    CHECK(fs::exists(out / "g" / "gaussian_check.json"));
    CHECK(cli("trajectories " + tiny + " --out " + (out / "t").string()) == 0);
    CHECK(fs::exists(out / "t" / "trajectories.csv"));
    CHECK(cli("table " + (out / "ok" / "summary.json").string() + " --out " + (out / "tab").string()) == 0);
    CHECK(fs::exists(out / "tab" / "table.md"));
    CHECK(cli("table " + (out / "missing.json").string()) == 2);
    fs::remove_all(out);
}

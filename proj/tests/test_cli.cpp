#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srmpc/cli.hpp"
#include "srmpc/config.hpp"
#include "srmpc/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace srmpc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("srmpc_test_" + std::to_string(RngStream::mix(
                                    std::chrono::steady_clock::now().time_since_epoch().count())));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string write_config(const fs::path& dir, const std::string& name,
                         const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << body;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSimBody = R"({
  "benchmark": {"name": "motivating_example", "delta": 0.05},
  "noise": {"W": {"diag": [0.001, 0.001]}, "V": [[0.01]]},
  "sim": {
    "steps": 10,
    "horizon": 8,
    "x0_star": [0.4, 0.1],
    "y0": [0.0, 0.0],
    "sigma0": {"diag": [0.05, 0.05]},
    "controllers": [{"type": "nominal"}, {"type": "self_reflective", "alpha": 1.0}],
    "seed": 3,
    "solver": {"tol": 1e-8, "max_iterations": 400}
  },
  "output": {"dir": "%OUT%", "prefix": "demo"}
}
)";

std::string with_out(const std::string& body, const fs::path& out) {
    std::string s = body;
    const std::string key = "%OUT%";
    s.replace(s.find(key), key.size(), out.string());
    return s;
}

}  // namespace

#include "srmpc/rng.hpp"
#include <chrono>

TEST_CASE("config loader: strict keys, diagnostics, and defaults") {
    TempDir tmp;
    {
        const std::string path = write_config(tmp.path, "bad_key.json", R"({
          "benchmark": {"name": "predator_prey", "delta": 0.05, "oops": 1},
          "noise": {"W": {"diag": [1e-4, 1e-4, 2.5e-4]}, "V": [[100.0]]}
        })");
        CHECK_THROWS_WITH_AS(load_experiment_config(path),
                             doctest::Contains("unknown key 'oops'"), ConfigError);
    }
    {
        const std::string path = write_config(tmp.path, "parse.json", "{\n  \"benchmark\": ,\n}");
        try {
            load_experiment_config(path);
            CHECK(false);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    {
        const std::string path = write_config(tmp.path, "ok.json", R"({
          "benchmark": {"name": "predator_prey", "delta": 0.05},
          "noise": {"W": {"diag": [1e-4, 1e-4, 2.5e-4]}, "V": [[100.0]]},
          "game": {"horizon": 5, "x0_star": [1, 1, 0.5], "sigma0": {"diag": [0.1, 0.1, 0.1]}}
        })");
        const ExperimentConfig cfg = load_experiment_config(path);
        CHECK(cfg.benchmark.name == "predator_prey");
        CHECK(cfg.game.present);
        CHECK(cfg.game.sample_y0);
        CHECK(cfg.noise.gamma == doctest::Approx(4.0 * 10.0));
        CHECK(cfg.config_hash != 0);
        const Model model = build_model(cfg.benchmark);
        CHECK(model.n_x == 3);
    }
    {
        const std::string path = write_config(tmp.path, "steps.json", R"({
          "benchmark": {"name": "motivating_example", "delta": 0.05},
          "noise": {"W": {"diag": [0.001, 0.001]}, "V": [[0.01]]},
          "sim": {"steps": 0, "horizon": 5, "x0_star": [0, 0],
                  "sigma0": {"diag": [0.1, 0.1]},
                  "controllers": [{"type": "nominal"}]}
        })");
        CHECK_THROWS_AS(load_experiment_config(path), ConfigError);
    }
    {
        // alpha on a nominal controller is rejected
        const std::string path = write_config(tmp.path, "alpha.json", R"({
          "benchmark": {"name": "motivating_example", "delta": 0.05},
          "noise": {"W": {"diag": [0.001, 0.001]}, "V": [[0.01]]},
          "sim": {"steps": 5, "horizon": 5, "x0_star": [0, 0],
                  "sigma0": {"diag": [0.1, 0.1]},
                  "controllers": [{"type": "nominal", "alpha": 1.0}]}
        })");
        CHECK_THROWS_AS(load_experiment_config(path), ConfigError);
    }
}

TEST_CASE("cmd_simulate: trace files, summary, and exit codes") {
    TempDir tmp;
    const fs::path out = tmp.path / "out";
    const std::string cfg_path =
        write_config(tmp.path, "sim.json", with_out(kSimBody, out));

    CHECK(cmd_simulate(cfg_path) == 0);
    CHECK(fs::exists(out / "demo_nominal.csv"));
    CHECK(fs::exists(out / "demo_self_reflective_alpha_1.000000.csv"));
    CHECK(fs::exists(out / "demo_summary.json"));

    // header and row shape of the trace CSV
    const std::string csv = slurp(out / "demo_nominal.csv");
    CHECK(csv.rfind("k,z0,z1,y0,y1,u0,u1,eta0,stage_cost,trace_Sigma,diverged\n", 0) == 0);
    int rows = 0;
    for (char ch : csv) rows += ch == '\n' ? 1 : 0;
    CHECK(rows == 11);  // header + 10 steps

    // missing config and config errors map to exit code 2
    CHECK(cmd_simulate((tmp.path / "missing.json").string()) == 2);
    const std::string bad =
        write_config(tmp.path, "bad.json", R"({"benchmark": {"name": "nope"}})");
    CHECK(cmd_simulate(bad) == 2);
}

TEST_CASE("cmd_simulate: repeated runs produce byte-identical CSVs") {
    TempDir tmp;
    const fs::path out_a = tmp.path / "a";
    const fs::path out_b = tmp.path / "b";
    const std::string cfg_a = write_config(tmp.path, "a.json", with_out(kSimBody, out_a));
    const std::string cfg_b = write_config(tmp.path, "b.json", with_out(kSimBody, out_b));
    REQUIRE(cmd_simulate(cfg_a) == 0);
    REQUIRE(cmd_simulate(cfg_b) == 0);
    CHECK(slurp(out_a / "demo_nominal.csv") == slurp(out_b / "demo_nominal.csv"));
    CHECK(slurp(out_a / "demo_self_reflective_alpha_1.000000.csv") ==
          slurp(out_b / "demo_self_reflective_alpha_1.000000.csv"));
}

TEST_CASE("cmd_analyze: requires at least one analysis and writes a report") {
    TempDir tmp;
    {
        const std::string path = write_config(tmp.path, "empty.json", R"({
          "benchmark": {"name": "motivating_example", "delta": 0.05},
          "noise": {"W": {"diag": [0.001, 0.001]}, "V": [[0.01]]},
          "analysis": {}
        })");
        CHECK(cmd_analyze(path) == 2);
    }
    {
        const fs::path out = tmp.path / "rep";
        std::string body = R"({
          "benchmark": {"name": "motivating_example", "delta": 0.08},
          "noise": {"W": {"diag": [0.0, 0.0]}, "V": [[0.02]]},
          "game": {"horizon": 6, "x0_star": [0.8, 0.3],
                   "sigma0": {"diag": [0.02, 0.02]},
                   "solver": {"tol": 1e-9, "max_iterations": 2000}},
          "analysis": {
            "loss_decomposition": {"seed": 5},
            "second_order_estimate": true,
            "monte_carlo": {"trials": 60, "seed": 6}
          },
          "output": {"dir": "%OUT%", "prefix": "loss"}
        })";
        const std::string path =
            write_config(tmp.path, "an.json", with_out(body, out));
        CHECK(cmd_analyze(path) == 0);
        const std::string report = slurp(out / "loss_report.json");
        CHECK(report.find("telescoping_gap") != std::string::npos);
        CHECK(report.find("gap_over_stderr") != std::string::npos);
        CHECK(report.find("config_hash") != std::string::npos);
    }
}

TEST_CASE("cmd_sweep_alpha: emits the trade-off table") {
    TempDir tmp;
    const fs::path out = tmp.path / "sweep";
    std::string body = R"({
      "benchmark": {"name": "predator_prey", "delta": 0.05},
      "noise": {"W": {"diag": [5e-4, 5e-4, 1.25e-3]}, "V": [[20.0]]},
      "analysis": {
        "alpha_sweep": {
          "alphas": [0.5, 1.0],
          "horizon": 60,
          "y0": [1.0, 1.0, 0.5],
          "sigma0": {"diag": [0.1, 0.1, 0.1]},
          "solver": {"tol": 1e-6, "max_iterations": 1500}
        }
      },
      "output": {"dir": "%OUT%", "prefix": "sw"}
    })";
    const std::string path = write_config(tmp.path, "sweep.json", with_out(body, out));
    CHECK(cmd_sweep_alpha(path) == 0);
    const std::string report = slurp(out / "sw_alpha_sweep.json");
    CHECK(report.find("expected_loss") != std::string::npos);
    CHECK(report.find("monotone_decreasing") != std::string::npos);

    // sweep-alpha on a config without the sweep section is a config error
    const std::string no_sweep = write_config(tmp.path, "nos.json", R"({
      "benchmark": {"name": "motivating_example", "delta": 0.05},
      "noise": {"W": {"diag": [0.001, 0.001]}, "V": [[0.01]]}
    })");
    CHECK(cmd_sweep_alpha(no_sweep) == 2);
}

TEST_CASE("format_double is locale-independent shortest round trip") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-1.25e-3) == "-0.00125");
    const double v = 1.0 / 3.0;
    CHECK(std::stod(format_double(v)) == v);
}

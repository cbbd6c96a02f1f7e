#include "srmpc/cli.hpp"
#include "srmpc/validation/criteria.hpp"

#include <CLI11.hpp>

#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"Self-reflective model predictive control toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    auto* simulate = app.add_subcommand("simulate", "Run the configured closed loop(s)");
    simulate->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* analyze = app.add_subcommand("analyze", "Run the configured loss analyses");
    analyze->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* sweep = app.add_subcommand("sweep-alpha", "Run only the alpha sweep");
    sweep->add_option("config", config_path, "experiment config (JSON)")->required();

    std::vector<int> criteria;
    std::string out_dir = "acceptance_out";
    auto* validate = app.add_subcommand("validate", "Run the acceptance suite");
    validate->add_option("--criteria", criteria, "subset of criterion ids (default: all)");
    validate->add_option("--out-dir", out_dir, "directory for validation artifacts");

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed()) return srmpc::cmd_simulate(config_path);
    if (analyze->parsed()) return srmpc::cmd_analyze(config_path);
    if (sweep->parsed()) return srmpc::cmd_sweep_alpha(config_path);
    if (validate->parsed()) {
        srmpc::validation::AcceptanceOptions opts;
        opts.criteria = criteria;
        opts.out_dir = out_dir;
        return srmpc::validation::run_acceptance_and_report(opts) == 0 ? 0 : 1;
    }
    return 2;
}

#include "srmpc/cli.hpp"

#include "srmpc/config.hpp"
#include "srmpc/loss.hpp"
#include "srmpc/report.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

namespace srmpc {

namespace {

using nlohmann::json;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

std::string out_path(const OutputSection& out, const std::string& suffix) {
    return (std::filesystem::path(out.dir) / (out.prefix + suffix)).string();
}

json trace_summary(const Model& model, const ClosedLoopTrace& trace) {
    json j;
    j["controller"] = trace.controller;
    j["seed"] = trace.seed;
    j["steps_executed"] = trace.steps();
    j["steps_planned"] = trace.planned_steps;
    j["diverged"] = trace.diverged;
    j["divergence_step"] = trace.divergence_step;
    j["solver_failed"] = trace.solver_failed;
    j["failure_step"] = trace.failure_step;
    double cost = 0.0;
    for (double c : trace.stage_cost) cost += c;
    j["stage_cost_total"] = cost;
    if (trace.complete()) j["terminal_cost"] = model.m(trace.z.back());
    return j;
}

int run_guarded(const std::string& config_path,
                const std::function<void(const ExperimentConfig&)>& body) {
    ExperimentConfig cfg;
    try {
        cfg = load_experiment_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    try {
        body(cfg);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

json run_alpha_sweep(const Model& model, const NoiseSpec& noise, const AlphaSweepConfig& sw) {
    json rows = json::array();
    bool monotone = true;
    double prev = 0.0;
    bool first = true;
    std::optional<std::vector<Vec>> warm;
    for (double alpha : sw.alphas) {
        SrConfig cfg;
        cfg.alpha = alpha;
        cfg.horizon = sw.horizon;
        cfg.solver = sw.solver.options();
        cfg.solver.warm_start = warm;
        OcpSolution sol =
            solve_self_reflective(model, sw.y0, CovarianceState(sw.sigma0), cfg, noise);
        warm = sol.trajectory.u;
        CompensatedSum total;
        for (double s : sol.stage_losses) total.add(s);
        const double expected_loss = total.value();
        json row;
        row["alpha"] = alpha;
        row["expected_loss"] = expected_loss;
        row["objective"] = sol.objective;
        row["converged"] = sol.converged;
        row["iterations"] = sol.iterations;
        rows.push_back(row);
        std::printf("  alpha = %-8g sum L = %.6f%s\n", alpha, expected_loss,
                    sol.converged ? "" : "  (not converged)");
        if (!first && expected_loss > prev) monotone = false;
        prev = expected_loss;
        first = false;
    }
    json out;
    out["rows"] = rows;
    out["monotone_decreasing"] = monotone;
    return out;
}

}  // namespace

int cmd_simulate(const std::string& config_path) {
    return run_guarded(config_path, [&](const ExperimentConfig& cfg) {
        if (!cfg.sim.present) throw ConfigError("config: cmd_simulate requires a 'sim' section");
        const Model model = build_model(cfg.benchmark);
        if (!cfg.noise.support_consistent()) {
            std::cerr << "warning: noise covariances exceed gamma^2 (support radius is "
                         "inconsistent with the declared second moments)\n";
        }

        json summary;
        summary["config_hash"] = cfg.config_hash;
        summary["benchmark"] = cfg.benchmark.name;
        summary["seed"] = cfg.sim.seed;
        summary["traces"] = json::array();

        const double t0 = now_seconds();
        for (const ControllerSpec& ctrl : cfg.sim.controllers) {
            SimConfig sim;
            sim.steps = cfg.sim.steps;
            sim.horizon = cfg.sim.horizon;
            sim.x0_star = cfg.sim.x0_star;
            sim.y0 = cfg.sim.y0;
            sim.sigma0 = cfg.sim.sigma0;
            sim.controller = ctrl;
            sim.seed = cfg.sim.seed;
            sim.divergence_bound = cfg.sim.divergence_bound;
            sim.solver = cfg.sim.solver.options();

            const ClosedLoopTrace trace = ctrl.kind == ControllerKind::Nominal
                                              ? run_cascade_nominal(model, cfg.noise, sim)
                                              : run_self_reflective(model, cfg.noise, sim);

            const std::string csv_path = out_path(cfg.output, "_" + ctrl.id() + ".csv");
            write_text_atomic(csv_path, trace_csv(model, trace));
            json ts = trace_summary(model, trace);
            ts["trace_file"] = csv_path;
            if (cfg.output.plot_data) {
                const std::string plot_path = out_path(cfg.output, "_" + ctrl.id() + "_plot.csv");
                write_text_atomic(plot_path, plot_csv(model, trace));
                ts["plot_file"] = plot_path;
            }
            summary["traces"].push_back(ts);
            std::printf("%s: %d steps%s%s -> %s\n", ctrl.id().c_str(), trace.steps(),
                        trace.diverged ? ", DIVERGED" : "",
                        trace.solver_failed ? ", SOLVER FAILED" : "", csv_path.c_str());
        }
        summary["wall_time_seconds"] = now_seconds() - t0;
        write_text_atomic(out_path(cfg.output, "_summary.json"), summary.dump(2) + "\n");
    });
}

int cmd_analyze(const std::string& config_path) {
    return run_guarded(config_path, [&](const ExperimentConfig& cfg) {
        if (!cfg.analysis.any()) {
            throw ConfigError("config: cmd_analyze requires at least one analysis");
        }
        const Model model = build_model(cfg.benchmark);

        json report;
        report["config_hash"] = cfg.config_hash;
        report["benchmark"] = cfg.benchmark.name;
        const double t0 = now_seconds();

        const bool needs_game = cfg.analysis.loss_decomposition || cfg.analysis.estimate ||
                                cfg.analysis.mc.present || cfg.analysis.gamma.present;
        GameConfig game;
        if (needs_game) {
            if (!cfg.game.present) {
                throw ConfigError("config: the requested analyses need a 'game' section");
            }
            game.horizon = cfg.game.horizon;
            game.x0_star = cfg.game.x0_star;
            game.y0 = cfg.game.y0;
            game.sample_y0 = cfg.game.sample_y0;
            game.sigma0 = cfg.game.sigma0;
            game.controller = cfg.game.controller;
            game.solver = cfg.game.solver.options();
        }
        LossConfig loss_cfg;
        if (cfg.game.present) {
            loss_cfg.tol = cfg.game.solver.tol;
            loss_cfg.max_iterations = cfg.game.solver.max_iterations;
        }

        double estimate = 0.0;
        bool have_estimate = false;
        if (cfg.analysis.estimate) {
            OcpSolution plan = solve_nominal(
                model, game.x0_star, std::vector<Vec>(game.horizon, Vec::Zero(model.n_x)),
                game.solver);
            SecondOrderEstimate est = second_order_estimate(
                model, plan.trajectory, CovarianceState(game.sigma0), cfg.noise);
            estimate = est.total;
            have_estimate = true;
            json je;
            je["total"] = est.total;
            je["stages"] = est.stages;
            report["second_order_estimate"] = je;
            std::printf("second-order estimate: %.8f\n", est.total);
        }

        if (cfg.analysis.loss_decomposition) {
            const ClosedLoopTrace trace =
                run_game_trace(model, cfg.noise, game, cfg.analysis.loss_seed);
            if (!trace.complete()) {
                throw NumericError("analyze: the game trace did not complete");
            }
            const LossReport rep = loss_decomposition(model, trace, loss_cfg);
            json jl;
            jl["seed"] = cfg.analysis.loss_seed;
            jl["J_star"] = rep.J_star;
            jl["J_cl"] = rep.J_cl;
            jl["delta_total"] = rep.delta_total;
            jl["delta_stages"] = rep.delta_stages;
            jl["telescoping_gap"] = rep.telescoping_gap;
            report["loss_decomposition"] = jl;
            std::printf("loss decomposition: J*=%.8f J_cl=%.8f delta=%.3e gap=%.3e\n",
                        rep.J_star, rep.J_cl, rep.delta_total, rep.telescoping_gap);
        }

        if (cfg.analysis.mc.present) {
            const MonteCarloResult mc = monte_carlo_loss(model, cfg.noise, game,
                                                         cfg.analysis.mc.trials,
                                                         cfg.analysis.mc.seed, loss_cfg);
            json jm;
            jm["trials"] = cfg.analysis.mc.trials;
            jm["seed"] = cfg.analysis.mc.seed;
            jm["mean"] = mc.mean;
            jm["stderr"] = mc.stderr_;
            jm["failed"] = mc.failed;
            if (have_estimate) {
                jm["abs_gap_to_estimate"] = std::abs(mc.mean - estimate);
                jm["gap_over_stderr"] = std::abs(mc.mean - estimate) / mc.stderr_;
            }
            report["monte_carlo"] = jm;
            std::printf("monte carlo: mean=%.8f stderr=%.2e (%d trials, %d failed)\n", mc.mean,
                        mc.stderr_, cfg.analysis.mc.trials, mc.failed);
        }

        if (cfg.analysis.gamma.present) {
            const GammaStudy study =
                gamma_scaling_study(model, cfg.noise, game, cfg.analysis.gamma.levels,
                                    cfg.analysis.gamma.trials, cfg.analysis.gamma.seed,
                                    loss_cfg);
            json jg;
            jg["trials"] = cfg.analysis.gamma.trials;
            jg["seed"] = cfg.analysis.gamma.seed;
            jg["slope"] = study.slope;
            jg["usable_levels"] = study.usable_levels;
            jg["noise_floor"] = study.noise_floor;
            jg["levels"] = json::array();
            for (const GammaLevel& lv : study.levels) {
                json row;
                row["scale"] = lv.scale;
                row["gamma"] = lv.gamma;
                row["mc_mean"] = lv.mc_mean;
                row["mc_stderr"] = lv.mc_stderr;
                row["estimate"] = lv.estimate;
                row["gap"] = lv.gap;
                row["above_noise_floor"] = lv.above_noise_floor;
                jg["levels"].push_back(row);
                std::printf("gamma %.4f: mc=%.8f est=%.8f gap=%.3e (stderr %.2e)\n", lv.gamma,
                            lv.mc_mean, lv.estimate, lv.gap, lv.mc_stderr);
            }
            if (study.noise_floor) {
                std::printf("gamma study: gap below the statistical noise floor\n");
            } else {
                std::printf("gamma study: fitted slope %.3f over %d levels\n", study.slope,
                            study.usable_levels);
            }
            report["gamma_scaling"] = jg;
        }

        if (cfg.analysis.sweep.present) {
            std::printf("alpha sweep:\n");
            report["alpha_sweep"] = run_alpha_sweep(model, cfg.noise, cfg.analysis.sweep);
        }

        report["wall_time_seconds"] = now_seconds() - t0;
        const std::string path = out_path(cfg.output, "_report.json");
        write_text_atomic(path, report.dump(2) + "\n");
        std::printf("report written to %s\n", path.c_str());
    });
}

int cmd_sweep_alpha(const std::string& config_path) {
    return run_guarded(config_path, [&](const ExperimentConfig& cfg) {
        if (!cfg.analysis.sweep.present) {
            throw ConfigError("config: cmd_sweep_alpha requires analysis.alpha_sweep");
        }
        const Model model = build_model(cfg.benchmark);
        json report;
        report["config_hash"] = cfg.config_hash;
        report["benchmark"] = cfg.benchmark.name;
        std::printf("alpha sweep:\n");
        report["alpha_sweep"] = run_alpha_sweep(model, cfg.noise, cfg.analysis.sweep);
        const std::string path = out_path(cfg.output, "_alpha_sweep.json");
        write_text_atomic(path, report.dump(2) + "\n");
        std::printf("report written to %s\n", path.c_str());
    });
}

}  // namespace srmpc

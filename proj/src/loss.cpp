#include "srmpc/loss.hpp"

#include <algorithm>
#include <cmath>

namespace srmpc {

namespace {

std::vector<Vec> subrange(const std::vector<Vec>& seq, int from) {
    return std::vector<Vec>(seq.begin() + from, seq.end());
}

void require_complete(const ClosedLoopTrace& trace, const char* who) {
    trace.validate();
    if (!trace.complete()) {
        throw std::invalid_argument(std::string(who) + ": trace is incomplete (diverged or "
                                                       "solver failure)");
    }
}

SolverOptions loss_solver(const LossConfig& cfg) {
    SolverOptions o;
    o.tol = cfg.tol;
    o.max_iterations = cfg.max_iterations;
    return o;
}

}  // namespace

double utopian_cost(const Model& model, const Vec& x0_star, const std::vector<Vec>& w_star,
                    const LossConfig& cfg) {
    return solve_nominal(model, x0_star, w_star, loss_solver(cfg)).objective;
}

double stage_loss(const Model& model, const ClosedLoopTrace& trace, int k,
                  const LossConfig& cfg) {
    require_complete(trace, "stage_loss");
    const int N = trace.steps();
    if (k < 0 || k >= N) throw std::invalid_argument("stage_loss: stage index out of range");

    // Realized stage value: l(z_k, u_k) plus the optimal tail cost from
    // z_{k+1} under the realized disturbances.
    SolverOptions tail_opts = loss_solver(cfg);
    tail_opts.warm_start = k + 1 < N ? std::optional(subrange(trace.u, k + 1)) : std::nullopt;
    OcpSolution tail = solve_nominal(model, trace.z[k + 1], subrange(trace.w, k + 1), tail_opts);
    const double applied_value = tail.objective + trace.stage_cost[k];

    // Optimal stage value from z_k under the same disturbance tail. Warm
    // starting with [u_k, tail solution] makes the initial iterate cost
    // equal to applied_value, so descent keeps the difference non-negative.
    std::vector<Vec> warm;
    warm.reserve(static_cast<size_t>(N - k));
    warm.push_back(trace.u[k]);
    for (const Vec& uu : tail.trajectory.u) warm.push_back(uu);
    SolverOptions full_opts = loss_solver(cfg);
    full_opts.warm_start = warm;
    OcpSolution best = solve_nominal(model, trace.z[k], subrange(trace.w, k), full_opts);

    return applied_value - best.objective;
}

LossReport loss_decomposition(const Model& model, const ClosedLoopTrace& trace,
                              const LossConfig& cfg) {
    require_complete(trace, "loss_decomposition");
    const int N = trace.steps();

    LossReport rep;
    rep.J_cl = trace.realized_cost(model.m(trace.z[N]));

    // Warm-starting the utopian solve from the applied controls guarantees
    // J_star <= J_cl up to rounding: the initial iterate reproduces the
    // realized trajectory.
    SolverOptions opts = loss_solver(cfg);
    opts.warm_start = trace.u;
    rep.J_star = solve_nominal(model, trace.z[0], trace.w, opts).objective;
    rep.delta_total = rep.J_cl - rep.J_star;

    rep.delta_stages.resize(N);
    CompensatedSum sum;
    for (int k = 0; k < N; ++k) {
        rep.delta_stages[k] = stage_loss(model, trace, k, cfg);
        sum.add(rep.delta_stages[k]);
    }
    rep.telescoping_gap = std::abs(rep.delta_total - sum.value());
    return rep;
}

SecondOrderEstimate second_order_estimate(const Model& model, const Trajectory& plan,
                                          const CovarianceState& sigma0,
                                          const NoiseSpec& noise) {
    plan.validate();
    const BackwardSweep sweep = backward_sweep(model, plan);
    const std::vector<CovarianceState> sig =
        predict_variance_sequence(model, plan.x, plan.u, sigma0, noise);

    SecondOrderEstimate est;
    est.stages.resize(sweep.phi.size());
    CompensatedSum total;
    for (size_t k = 0; k < sweep.phi.size(); ++k) {
        est.stages[k] = stage_expected_loss(sweep.phi[k], sig[k]);
        total.add(est.stages[k]);
    }
    est.total = total.value();
    return est;
}

MonteCarloResult monte_carlo_loss(const Model& model, const NoiseSpec& noise,
                                  const GameConfig& game, int trials, std::uint64_t seed,
                                  const LossConfig& cfg) {
    if (trials < 2) throw std::invalid_argument("monte_carlo_loss: trials must be >= 2");

    MonteCarloResult res;
    res.samples.reserve(static_cast<size_t>(trials));
    CompensatedSum mean_sum;
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = RngStream::derive(seed, static_cast<std::uint64_t>(t),
                                                           0x6d63ULL);
        ClosedLoopTrace trace = run_game_trace(model, noise, game, trial_seed);
        if (!trace.complete()) {
            ++res.failed;
            continue;
        }
        const double j_cl = trace.realized_cost(model.m(trace.z.back()));
        SolverOptions opts = loss_solver(cfg);
        opts.warm_start = trace.u;
        const double j_star = solve_nominal(model, trace.z[0], trace.w, opts).objective;
        const double delta = j_cl - j_star;
        res.samples.push_back(delta);
        mean_sum.add(delta);
    }
    const int n = static_cast<int>(res.samples.size());
    if (n < 2) throw NumericError("monte_carlo_loss: fewer than two completed trials");
    res.mean = mean_sum.value() / n;
    CompensatedSum var_sum;
    for (double s : res.samples) var_sum.add((s - res.mean) * (s - res.mean));
    res.stderr_ = std::sqrt(var_sum.value() / (n - 1) / n);
    return res;
}

GammaStudy gamma_scaling_study(const Model& model, const NoiseSpec& base_noise,
                               const GameConfig& game, const std::vector<double>& levels,
                               int trials, std::uint64_t seed, const LossConfig& cfg) {
    if (levels.size() < 3) {
        throw std::invalid_argument("gamma_scaling_study: at least 3 levels required");
    }
    for (size_t i = 1; i < levels.size(); ++i) {
        if (levels[i] >= levels[i - 1] || levels[i] <= 0.0) {
            throw std::invalid_argument("gamma_scaling_study: levels must be strictly "
                                        "decreasing and positive");
        }
    }

    GammaStudy study;
    for (double s : levels) {
        // The initial-estimate variance is part of the gamma-sized
        // randomness, so it scales with s^2 alongside W and V.
        NoiseSpec noise = base_noise.scaled(s);
        GameConfig g = game;
        g.sigma0 = s * s * game.sigma0;

        const MonteCarloResult mc = monte_carlo_loss(model, noise, g, trials, seed, cfg);

        // The reference plan follows the game's controller so the estimate
        // is evaluated along the trajectory that controller predicts.
        OcpSolution plan;
        if (g.controller.kind == ControllerKind::SelfReflective) {
            SrConfig sr;
            sr.alpha = g.controller.alpha;
            sr.horizon = g.horizon;
            sr.solver = loss_solver(cfg);
            plan = solve_self_reflective(model, g.x0_star, CovarianceState(g.sigma0), sr, noise);
        } else {
            plan = solve_nominal(model, g.x0_star,
                                 std::vector<Vec>(g.horizon, Vec::Zero(model.n_x)),
                                 loss_solver(cfg));
        }
        const SecondOrderEstimate est =
            second_order_estimate(model, plan.trajectory, CovarianceState(g.sigma0), noise);

        GammaLevel level;
        level.scale = s;
        level.gamma = noise.gamma;
        level.mc_mean = mc.mean;
        level.mc_stderr = mc.stderr_;
        level.estimate = est.total;
        level.gap = std::abs(mc.mean - est.total);
        level.above_noise_floor = level.gap > 2.0 * mc.stderr_;
        study.levels.push_back(level);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const GammaLevel& lv : study.levels) {
        if (!lv.above_noise_floor) continue;
        const double lx = std::log(lv.gamma);
        const double ly = std::log(std::max(lv.gap, 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    study.usable_levels = n;
    if (n >= 2) {
        study.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    } else {
        study.noise_floor = true;
    }
    return study;
}

double hessian_gap_check(const Model& model, const ClosedLoopTrace& trace, int k,
                         double fd_step, const LossConfig& cfg) {
    require_complete(trace, "hessian_gap_check");
    const int N = trace.steps();
    if (k < 0 || k >= N) throw std::invalid_argument("hessian_gap_check: stage out of range");
    if (fd_step <= 0.0) throw std::invalid_argument("hessian_gap_check: step must be > 0");
    if (fd_step * fd_step < 10.0 * cfg.tol) {
        throw std::invalid_argument("hessian_gap_check: step too small relative to the "
                                    "solver tolerance (conditioning)");
    }

    const Vec xi = trace.z[k];
    const int tail_len = N - k;

    // Certainty-equivalent tail plan from the true state; its sweep provides
    // the reference Phi_k.
    SolverOptions ce_opts = loss_solver(cfg);
    ce_opts.warm_start = subrange(trace.u, k);
    OcpSolution ce_plan = solve_nominal(
        model, xi, std::vector<Vec>(tail_len, Vec::Zero(model.n_x)), ce_opts);
    const BackwardSweep sweep = backward_sweep(model, ce_plan.trajectory);
    const Mat phi_k = sweep.phi[0];

    // Stage value of applying the certainty-equivalent law computed at the
    // perturbed estimate y; constant terms cancel in the second differences.
    std::optional<std::vector<Vec>> ce_warm(ce_plan.trajectory.u);
    std::optional<std::vector<Vec>> tail_warm;
    if (k + 1 < N) tail_warm = subrange(trace.u, k + 1);
    auto stage_value = [&](const Vec& y) {
        SolverOptions mu_opts = loss_solver(cfg);
        mu_opts.warm_start = ce_warm;
        OcpSolution mu_sol = solve_nominal(
            model, y, std::vector<Vec>(tail_len, Vec::Zero(model.n_x)), mu_opts);
        const Vec u_y = mu_sol.trajectory.u.front();
        ce_warm = mu_sol.trajectory.u;

        SolverOptions j_opts = loss_solver(cfg);
        j_opts.warm_start = tail_warm;
        const Vec x_next = model.f(xi, u_y) + trace.w[k];
        OcpSolution j_sol = solve_nominal(model, x_next, subrange(trace.w, k + 1), j_opts);
        tail_warm = j_sol.trajectory.u;
        return j_sol.objective + model.l(xi, u_y);
    };

    const int nx = model.n_x;
    const double h = fd_step;
    Mat gamma(nx, nx);
    for (int i = 0; i < nx; ++i) {
        for (int j = i; j < nx; ++j) {
            Vec ypp = xi, ypm = xi, ymp = xi, ymm = xi;
            ypp(i) += h;
            ypp(j) += h;
            ypm(i) += h;
            ypm(j) -= h;
            ymp(i) -= h;
            ymp(j) += h;
            ymm(i) -= h;
            ymm(j) -= h;
            const double d = (stage_value(ypp) - stage_value(ypm) - stage_value(ymp) +
                              stage_value(ymm)) /
                             (4.0 * h * h);
            gamma(i, j) = d;
            gamma(j, i) = d;
        }
    }
    return spectral_norm_sym(gamma - phi_k);
}

}  // namespace srmpc

#include "srmpc/validation/criteria.hpp"

#include "srmpc/cli.hpp"
#include "srmpc/config.hpp"
#include "srmpc/loss.hpp"
#include "srmpc/report.hpp"
#include "srmpc/validation/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace srmpc::validation {

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& msg) {
        if (!cond) {
            ok = false;
            detail << "FAILED: " << msg << "; ";
        }
    }
    void note(const std::string& msg) { detail << msg << "; "; }
};

NoiseSpec predator_noise(double delta) {
    // Euler step folds the time step into the disturbance channel, so the
    // per-step covariance carries one factor of delta; the measurement is a
    // point sample with variance 1/delta.
    Mat W = Mat::Zero(3, 3);
    W(0, 0) = delta * 0.01;
    W(1, 1) = delta * 0.01;
    W(2, 2) = delta * 0.025;
    Mat V(1, 1);
    V(0, 0) = 1.0 / delta;
    return NoiseSpec::bounded(W, V);
}

Mat diag3(double a, double b, double c) {
    Mat m = Mat::Zero(3, 3);
    m(0, 0) = a;
    m(1, 1) = b;
    m(2, 2) = c;
    return m;
}

double excitation_rms(const ClosedLoopTrace& trace) {
    // RMS deviation of the first two states from their late-run means.
    const int n = trace.steps();
    const int from = n / 2;
    Vec mean = Vec::Zero(2);
    for (int k = from; k < n; ++k) mean += trace.z[k].head(2);
    mean /= (n - from);
    double acc = 0.0;
    for (int k = from; k < n; ++k) acc += (trace.z[k].head(2) - mean).squaredNorm();
    return std::sqrt(acc / (n - from));
}

// ---------------------------------------------------------------------------
// 1. LQR equivalence
// ---------------------------------------------------------------------------
CriterionResult criterion_1(const AcceptanceOptions&) {
    Check c;
    RngStream rng(20260101ULL);
    double max_p_err = 0.0, max_u_err = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const LqInstance lq = random_lq_instance(rng);
        const int N = 3 + static_cast<int>(rng.next_u64() % 28);  // 3..30
        const Model model = lq.model();

        // Backward sweep along an arbitrary trajectory (blocks are constant
        // in the linear-quadratic case).
        Trajectory traj = rollout(model, random_vector(rng, lq.n_x),
                                  std::vector<Vec>(N, Vec::Zero(lq.n_u)),
                                  std::vector<Vec>(N, Vec::Zero(lq.n_x)));
        const BackwardSweep sweep = backward_sweep(model, traj);
        const std::vector<Mat> oracle =
            riccati_oracle(lq.A, lq.B, lq.Q, lq.R, lq.S, lq.P_terminal, N);
        for (int k = 0; k <= N; ++k) {
            // tolerance relative to the matrix scale (random instances can
            // carry large gains)
            const double gap = (sweep.omega[k].P - oracle[k]).cwiseAbs().maxCoeff() /
                               (1.0 + oracle[k].cwiseAbs().maxCoeff());
            max_p_err = std::max(max_p_err, gap);
        }

        const Vec x0 = random_vector(rng, lq.n_x);
        SolverOptions opts;
        opts.tol = 1e-12;
        opts.max_iterations = 4000;
        OcpSolution sol = solve_nominal(model, x0, std::vector<Vec>(N, Vec::Zero(lq.n_x)), opts);
        const Vec u_lqr = -lqr_gain(lq.A, lq.B, lq.R, lq.S, oracle[1]) * x0;
        const double u_gap = (sol.trajectory.u.front() - u_lqr).cwiseAbs().maxCoeff() /
                             (1.0 + u_lqr.cwiseAbs().maxCoeff());
        max_u_err = std::max(max_u_err, u_gap);
    }
    c.require(max_p_err <= 1e-10,
              "Riccati sweep vs oracle (relative): " + format_double(max_p_err));
    c.require(max_u_err <= 1e-8,
              "first control vs LQR feedback (relative): " + format_double(max_u_err));
    c.note("max relative P gap " + format_double(max_p_err) + ", max relative u gap " +
           format_double(max_u_err));
    return {1, "LQR equivalence on 20 random LQ instances", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 2. Kalman equivalence
// ---------------------------------------------------------------------------
CriterionResult criterion_2(const AcceptanceOptions&) {
    Check c;
    RngStream rng(20260202ULL);
    double max_err = 0.0;
    for (int inst = 0; inst < 5; ++inst) {
        LqInstance lq = random_lq_instance(rng);
        lq.A *= 0.9;  // keep the open loop stable over 100 steps
        const Model model = lq.model();
        NoiseSpec noise = NoiseSpec::bounded(random_psd(rng, lq.n_x, 0.05),
                                             random_psd(rng, lq.n_h, 0.1) +
                                                 0.01 * Mat::Identity(lq.n_h, lq.n_h));
        CovarianceState sig(random_psd(rng, lq.n_x, 0.2));
        Mat oracle_sig = sig.sigma;
        const Vec x_lin = Vec::Zero(lq.n_x);
        const Vec u = Vec::Zero(lq.n_u);
        for (int k = 0; k < 100; ++k) {
            sig = ekf_cov_update(model, x_lin, u, sig, noise);
            oracle_sig = kalman_oracle_step(lq.A, lq.C, noise.W, noise.V, oracle_sig);
            max_err = std::max(max_err, (sig.sigma - oracle_sig).cwiseAbs().maxCoeff());
        }
    }
    c.require(max_err <= 1e-12, "EKF vs Joseph-form Kalman oracle: " + format_double(max_err));
    c.note("max gap over 5 instances x 100 steps: " + format_double(max_err));
    return {2, "Kalman equivalence on linear models", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 3. Telescoping identity
// ---------------------------------------------------------------------------
CriterionResult criterion_3(const AcceptanceOptions&) {
    Check c;
    RngStream rng(20260303ULL);
    LossConfig loss_cfg;
    loss_cfg.tol = 1e-11;
    double worst_rel_gap = 0.0;
    int tested = 0;

    auto run_case = [&](const Model& model, const NoiseSpec& noise, GameConfig game,
                        std::uint64_t seed) {
        game.solver.tol = 1e-11;
        game.solver.max_iterations = 4000;
        const ClosedLoopTrace trace = run_game_trace(model, noise, game, seed);
        if (!trace.complete()) {
            c.require(false, "trace " + std::to_string(seed) + " did not complete");
            return;
        }
        const LossReport rep = loss_decomposition(model, trace, loss_cfg);
        const double rel = rep.telescoping_gap / (1.0 + std::abs(rep.delta_total));
        worst_rel_gap = std::max(worst_rel_gap, rel);
        c.require(rel <= 1e-6, "telescoping gap " + format_double(rel) + " on trace " +
                                   std::to_string(seed));
        ++tested;
    };

    for (int i = 0; i < 25; ++i) {
        LqInstance lq = random_lq_instance(rng, 3);
        const Model model = lq.model();
        NoiseSpec noise = NoiseSpec::bounded(random_psd(rng, lq.n_x, 0.004),
                                             random_psd(rng, lq.n_h, 0.01) +
                                                 0.005 * Mat::Identity(lq.n_h, lq.n_h));
        GameConfig game;
        game.horizon = 10 + static_cast<int>(rng.next_u64() % 11);
        game.x0_star = random_vector(rng, lq.n_x);
        game.sigma0 = random_psd(rng, lq.n_x, 0.02);
        game.sample_y0 = true;
        run_case(model, noise, game, 1000 + i);
    }
    for (int i = 0; i < 25; ++i) {
        BenchmarkParams bp;
        bp.delta = 0.08;
        const Model model = instantiate_benchmark("motivating_example", bp);
        Mat W = 0.002 * Mat::Identity(2, 2);
        Mat V(1, 1);
        V(0, 0) = 0.01;
        NoiseSpec noise = NoiseSpec::bounded(W, V);
        GameConfig game;
        game.horizon = 10 + static_cast<int>(rng.next_u64() % 6);
        game.x0_star = Vec(2);
        game.x0_star << 0.8 + 0.2 * rng.uniform(), 0.3 + 0.2 * rng.uniform();
        game.sigma0 = 0.02 * Mat::Identity(2, 2);
        game.sample_y0 = true;
        run_case(model, noise, game, 2000 + i);
    }
    c.note("50 traces, worst relative gap " + format_double(worst_rel_gap));
    c.require(tested == 50, "not all traces completed");
    return {3, "Telescoping identity on 50 seeded traces", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 4. Expected-loss expansion, exact regime
// ---------------------------------------------------------------------------
CriterionResult criterion_4(const AcceptanceOptions&) {
    Check c;
    BenchmarkParams bp;
    bp.A = Mat(2, 2);
    bp.A << 0.98, 0.10, -0.10, 0.95;
    bp.B = Mat::Identity(2, 2);
    bp.C = Mat(1, 2);
    bp.C << 1.0, 0.0;
    bp.Q = 0.5 * Mat::Identity(2, 2);
    bp.R = 0.5 * Mat::Identity(2, 2);
    bp.P = Mat::Identity(2, 2);
    const Model model = instantiate_benchmark("lq_custom", bp);

    // Estimate-error dominated setting: zero process noise keeps the
    // certainty-equivalent law optimal for the realized tail, which is the
    // regime where the second-order formula is exact.
    Mat V(1, 1);
    V(0, 0) = 0.02;
    NoiseSpec noise = NoiseSpec::bounded(Mat::Zero(2, 2), V);
    GameConfig game;
    game.horizon = 10;
    game.x0_star = Vec(2);
    game.x0_star << 0.8, -0.5;
    game.sigma0 = 0.03 * Mat::Identity(2, 2);
    game.sample_y0 = true;
    game.solver.tol = 1e-9;
    game.solver.max_iterations = 2000;

    LossConfig loss_cfg;
    loss_cfg.tol = 1e-9;
    const MonteCarloResult mc = monte_carlo_loss(model, noise, game, 10000, 424242ULL, loss_cfg);

    OcpSolution plan = solve_nominal(model, game.x0_star,
                                     std::vector<Vec>(game.horizon, Vec::Zero(2)),
                                     game.solver);
    const SecondOrderEstimate est =
        second_order_estimate(model, plan.trajectory, CovarianceState(game.sigma0), noise);

    const double gap = std::abs(mc.mean - est.total);
    c.require(gap <= 3.0 * mc.stderr_,
              "|MC - estimate| = " + format_double(gap) + " > 3 stderr = " +
                  format_double(3.0 * mc.stderr_));
    c.require(mc.failed == 0, std::to_string(mc.failed) + " failed trials");
    double min_sample = 0.0;
    for (double s : mc.samples) min_sample = std::min(min_sample, s);
    c.require(min_sample >= -1e-6, "negative loss sample " + format_double(min_sample));
    c.note("mc mean " + format_double(mc.mean) + " +- " + format_double(mc.stderr_) +
           ", estimate " + format_double(est.total) + ", gap/stderr " +
           format_double(gap / mc.stderr_));
    return {4, "Expected-loss expansion exact on LQ (10^4 trials)", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 5. Remainder order in the noise radius
// ---------------------------------------------------------------------------
CriterionResult criterion_5(const AcceptanceOptions&) {
    Check c;
    BenchmarkParams bp;
    bp.delta = 0.1;
    const Model model = instantiate_benchmark("motivating_example", bp);

    // Under the plain certainty-equivalent law this example never excites
    // the bilinear channel and the closed loop is exactly linear-quadratic,
    // so the remainder is identically zero. The self-reflective controller
    // keeps the coupling active, which is the regime the remainder bound
    // speaks about. Zero process noise keeps the certainty-equivalent
    // shortfall (an unrelated second-order term) out of the comparison.
    Mat V(1, 1);
    V(0, 0) = 0.09;
    NoiseSpec base = NoiseSpec::bounded(Mat::Zero(2, 2), V);
    GameConfig game;
    game.horizon = 12;
    game.x0_star = Vec(2);
    game.x0_star << 1.2, 0.5;
    game.sigma0 = 0.09 * Mat::Identity(2, 2);
    game.sample_y0 = true;
    game.controller.kind = ControllerKind::SelfReflective;
    game.controller.alpha = 1.0;
    game.solver.tol = 1e-10;
    game.solver.max_iterations = 3000;

    LossConfig loss_cfg;
    loss_cfg.tol = 1e-10;
    const GammaStudy study = gamma_scaling_study(model, base, game, {1.0, 0.5, 0.25}, 2000,
                                                 777001ULL, loss_cfg);
    std::ostringstream table;
    for (const GammaLevel& lv : study.levels) {
        table << "[gamma " << format_double(lv.gamma) << ": mc " << format_double(lv.mc_mean)
              << " est " << format_double(lv.estimate) << " gap " << format_double(lv.gap)
              << " stderr " << format_double(lv.mc_stderr) << "] ";
    }
    c.note(table.str());
    if (study.noise_floor) {
        c.note("gap below the statistical noise floor at all but one level; "
               "slope not identifiable");
    } else {
        c.note("fitted slope " + format_double(study.slope) + " over " +
               std::to_string(study.usable_levels) + " levels");
        c.require(study.slope >= 2.5, "slope " + format_double(study.slope) + " < 2.5");
    }
    return {5, "Remainder order (gamma scaling, 3 levels x 2000 trials)", c.ok,
            c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 6. Loss Hessian vs loss weight
// ---------------------------------------------------------------------------
CriterionResult criterion_6(const AcceptanceOptions&) {
    Check c;
    RngStream rng(20260606ULL);
    LossConfig loss_cfg;
    loss_cfg.tol = 1e-11;

    {
        LqInstance lq = random_lq_instance(rng, 2);
        const Model model = lq.model();
        NoiseSpec noise = NoiseSpec::bounded(random_psd(rng, lq.n_x, 0.01),
                                             random_psd(rng, lq.n_h, 0.02) +
                                                 0.01 * Mat::Identity(lq.n_h, lq.n_h));
        GameConfig game;
        game.horizon = 10;
        game.x0_star = random_vector(rng, lq.n_x);
        game.sigma0 = 0.02 * Mat::Identity(lq.n_x, lq.n_x);
        game.solver.tol = 1e-11;
        game.solver.max_iterations = 4000;
        const ClosedLoopTrace trace = run_game_trace(model, noise, game, 606ULL);
        const double gap = hessian_gap_check(model, trace, 4, 0.05, loss_cfg);
        c.require(gap <= 1e-4, "LQ Hessian gap " + format_double(gap));
        c.note("LQ gap " + format_double(gap));
    }

    {
        // The published bilinear example keeps its only costed state on
        // linear decoupled dynamics, so its certainty-equivalent problem is
        // exactly quadratic and the Hessian gap is zero at every noise
        // level. The first-order shrinkage is checked on a variant with the
        // same bilinear dynamics but both states penalized, which makes the
        // cost-to-go genuinely nonlinear.
        BenchmarkParams bp;
        bp.delta = 0.1;
        Model model = instantiate_benchmark("motivating_example", bp);
        const double d = bp.delta;
        model.l = [d](const Vec& x, const Vec& u) {
            return d * (x(0) * x(0) + 0.5 * x(1) * x(1) + u.squaredNorm());
        };
        model.l_x = [d](const Vec& x, const Vec&) {
            Vec g(2);
            g << 2.0 * d * x(0), d * x(1);
            return g;
        };
        model.l_xx = [d](const Vec&, const Vec&) {
            Mat q = Mat::Zero(2, 2);
            q(0, 0) = 2.0 * d;
            q(1, 1) = d;
            return q;
        };
        auto gap_at_scale = [&](double s) {
            Mat W = s * s * 0.01 * Mat::Identity(2, 2);
            Mat V(1, 1);
            V(0, 0) = s * s * 0.02;
            NoiseSpec noise = NoiseSpec::bounded(W, V);
            GameConfig game;
            game.horizon = 10;
            game.x0_star = Vec(2);
            game.x0_star << 1.1, 0.5;
            game.sigma0 = s * s * 0.02 * Mat::Identity(2, 2);
            game.solver.tol = 1e-11;
            game.solver.max_iterations = 4000;
            const ClosedLoopTrace trace = run_game_trace(model, noise, game, 616ULL);
            return hessian_gap_check(model, trace, 4, 0.02, loss_cfg);
        };
        const double g1 = gap_at_scale(1.0);
        const double g2 = gap_at_scale(0.5);
        const double ratio = g2 / g1;
        c.note("nonlinear gaps " + format_double(g1) + " -> " + format_double(g2) +
               " (ratio " + format_double(ratio) + ")");
        c.require(ratio >= 0.3 && ratio <= 0.8,
                  "gap ratio " + format_double(ratio) + " outside [0.3, 0.8]");
    }
    return {6, "Loss Hessian matches the loss weight", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 7. Gradient contract
// ---------------------------------------------------------------------------
CriterionResult criterion_7(const AcceptanceOptions&) {
    Check c;
    RngStream rng(20260707ULL);
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        const bool predator = inst >= 6;
        Model model;
        NoiseSpec noise;
        Vec x0;
        Mat sigma0;
        if (predator) {
            BenchmarkParams bp;
            bp.delta = 0.05;
            model = instantiate_benchmark("predator_prey", bp);
            noise = predator_noise(bp.delta);
            x0 = predator_steady_state() + random_vector(rng, 3, 0.1);
            sigma0 = diag3(0.1, 0.1, 0.1);
        } else {
            BenchmarkParams bp;
            bp.delta = 0.05 + 0.1 * rng.uniform();
            model = instantiate_benchmark("motivating_example", bp);
            Mat V(1, 1);
            V(0, 0) = 0.05;
            noise = NoiseSpec::bounded(0.01 * Mat::Identity(2, 2), V);
            x0 = random_vector(rng, 2, 0.8);
            sigma0 = random_psd(rng, 2, 0.05);
        }
        const int N = 5 + static_cast<int>(rng.next_u64() % 16);  // 5..20
        const double alpha = std::vector<double>{0.3, 1.0, 2.0}[inst % 3];
        std::vector<Vec> u(N);
        for (int k = 0; k < N; ++k) u[k] = random_vector(rng, model.n_u, 0.3);

        const CovarianceState sig(sigma0);
        const std::vector<Vec> g = sr_gradient(model, x0, sig, u, alpha, noise);
        const std::vector<Vec> g_fd = fd_control_gradient(
            [&](const std::vector<Vec>& uu) {
                return sr_objective(model, x0, sig, uu, alpha, noise).objective;
            },
            u);
        double num = 0.0, den = 0.0;
        for (size_t k = 0; k < g.size(); ++k) {
            num += (g[k] - g_fd[k]).squaredNorm();
            den += g_fd[k].squaredNorm();
        }
        const double rel = std::sqrt(num) / (1e-12 + std::sqrt(den));
        worst = std::max(worst, rel);
        c.require(rel <= 1e-5, "instance " + std::to_string(inst) + " rel err " +
                                   format_double(rel));
    }
    c.note("worst relative error " + format_double(worst));
    return {7, "Gradient matches central differences (10 instances)", c.ok, c.detail.str(),
            0.0};
}

// ---------------------------------------------------------------------------
// 8. Failure / rescue on the bilinear example
// ---------------------------------------------------------------------------
CriterionResult criterion_8(const AcceptanceOptions&) {
    Check c;
    BenchmarkParams bp;
    bp.delta = 0.015;
    const Model model = instantiate_benchmark("motivating_example", bp);
    Mat W = 0.0025 * Mat::Identity(2, 2);
    Mat V(1, 1);
    V(0, 0) = 0.01;
    const NoiseSpec noise = NoiseSpec::bounded(W, V);

    auto base_cfg = [&](ControllerKind kind, double alpha, std::uint64_t seed) {
        SimConfig cfg;
        cfg.steps = 1000;
        cfg.horizon = 20;
        cfg.x0_star = Vec(2);
        cfg.x0_star << 0.3, 0.0;
        cfg.y0 = Vec::Zero(2);
        cfg.sigma0 = 0.1 * Mat::Identity(2, 2);
        cfg.controller.kind = kind;
        cfg.controller.alpha = alpha;
        cfg.seed = seed;
        cfg.divergence_bound = 1e3;
        cfg.solver.tol = 1e-8;
        cfg.solver.max_iterations = 600;
        return cfg;
    };

    int nominal_diverged = 0, sr_bounded = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ClosedLoopTrace nom =
            run_cascade_nominal(model, noise, base_cfg(ControllerKind::Nominal, 0.0, seed));
        if (nom.diverged) ++nominal_diverged;
        const ClosedLoopTrace sr = run_self_reflective(
            model, noise, base_cfg(ControllerKind::SelfReflective, 1.0, seed));
        if (!sr.diverged && !sr.solver_failed) ++sr_bounded;
    }
    c.require(nominal_diverged >= 9, "nominal cascade diverged on only " +
                                         std::to_string(nominal_diverged) + "/10 seeds");
    c.require(sr_bounded >= 9,
              "self-reflective bounded on only " + std::to_string(sr_bounded) + "/10 seeds");
    c.note("nominal diverged " + std::to_string(nominal_diverged) + "/10, self-reflective "
           "bounded " + std::to_string(sr_bounded) + "/10");
    return {8, "Nominal cascade fails, self-reflective rescues", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 9. Predator-prey case study
// ---------------------------------------------------------------------------
CriterionResult criterion_9(const AcceptanceOptions& opts) {
    Check c;
    const double delta = 0.01;
    const int N = 1000;
    BenchmarkParams bp;
    bp.delta = delta;
    const Model model = instantiate_benchmark("predator_prey", bp);
    const NoiseSpec noise = predator_noise(delta);
    const Vec y0 = predator_steady_state();
    const Mat sigma0 = diag3(0.1, 0.1, 0.1);

    const std::vector<double> alphas = {0.5, 1.0, 2.0};
    const std::vector<double> reference = {2.94, 2.84, 2.80};

    // (b) expected loss at the solution of the open-loop problem, per alpha.
    std::vector<double> expected_losses;
    std::optional<std::vector<Vec>> warm;
    for (double alpha : alphas) {
        SrConfig cfg;
        cfg.alpha = alpha;
        cfg.horizon = N;
        cfg.solver.tol = 1e-6;
        cfg.solver.max_iterations = 3000;
        cfg.solver.warm_start = warm;
        OcpSolution sol = solve_self_reflective(model, y0, CovarianceState(sigma0), cfg, noise);
        warm = sol.trajectory.u;
        CompensatedSum total;
        for (double s : sol.stage_losses) total.add(s);
        expected_losses.push_back(total.value());
        c.require(sol.converged || sol.gradient_norm < 1e-4,
                  "alpha " + format_double(alpha) + " solve did not converge (grad " +
                      format_double(sol.gradient_norm) + ")");
    }
    std::ostringstream tbl;
    for (size_t i = 0; i < alphas.size(); ++i) {
        tbl << "alpha " << format_double(alphas[i]) << " -> sum L "
            << format_double(expected_losses[i]) << "; ";
    }
    c.note(tbl.str());

    // Qualitative hard gate 1: monotone decreasing expected loss.
    c.require(expected_losses[0] > expected_losses[1] &&
                  expected_losses[1] > expected_losses[2],
              "expected loss not monotone decreasing over alpha");

    bool quantitative_ok = true;
    for (size_t i = 0; i < alphas.size(); ++i) {
        const double rel = std::abs(expected_losses[i] - reference[i]) / reference[i];
        if (rel > 0.15) quantitative_ok = false;
    }

    // Qualitative hard gate 2: excitation grows with alpha; prey settles
    // above 1 (zero realized noise, controller unaware).
    std::vector<double> excitation;
    std::vector<double> prey_mean;
    for (double alpha : alphas) {
        SimConfig cfg;
        cfg.steps = 500;
        cfg.horizon = N;
        cfg.x0_star = y0;
        cfg.y0 = y0;
        cfg.sigma0 = sigma0;
        cfg.controller.kind = ControllerKind::SelfReflective;
        cfg.controller.alpha = alpha;
        cfg.seed = 99;
        cfg.zero_realized_noise = true;
        cfg.solver.tol = 1e-6;
        cfg.solver.max_iterations = 2000;
        const ClosedLoopTrace trace = run_self_reflective(model, noise, cfg);
        c.require(!trace.diverged && !trace.solver_failed,
                  "no-noise run diverged at alpha " + format_double(alpha));
        // mean control magnitude doubles as excitation measure over states
        double ex = excitation_rms(trace);
        double um = 0.0;
        for (const Vec& u : trace.u) um += u.squaredNorm();
        ex = std::max(ex, std::sqrt(um / trace.steps()));
        excitation.push_back(ex);
        double zm = 0.0;
        for (int k = trace.steps() / 2; k < trace.steps(); ++k) zm += trace.z[k](0);
        prey_mean.push_back(zm / (trace.steps() - trace.steps() / 2));
    }
    c.require(excitation[0] < excitation[1] && excitation[1] < excitation[2],
              "excitation amplitude not increasing with alpha");
    c.require(prey_mean[1] > 1.0, "prey population does not settle above 1");
    {
        std::ostringstream ex;
        ex << "excitation ";
        for (double e : excitation) ex << format_double(e) << " ";
        ex << "; prey late mean ";
        for (double p : prey_mean) ex << format_double(p) << " ";
        c.note(ex.str());
    }

    // Qualitative hard gate 3: nominal MPC divergent under noise,
    // self-reflective bounded. The nominal loop dies either by crossing the
    // state bound or, typically earlier, when its own horizon prediction
    // leaves the finite range.
    {
        SimConfig cfg;
        cfg.steps = 25000;
        cfg.horizon = N;
        cfg.x0_star = y0;
        cfg.y0 = y0;
        cfg.sigma0 = sigma0;
        cfg.controller.kind = ControllerKind::Nominal;
        cfg.seed = 7;
        cfg.divergence_bound = 1e3;
        cfg.solver.tol = 1e-7;
        cfg.solver.max_iterations = 800;
        const ClosedLoopTrace nom = run_cascade_nominal(model, noise, cfg);
        c.require(nom.closed_loop_failed(), "nominal cascade did not diverge under noise");
        double nom_max = 0.0;
        for (const Vec& z : nom.z) nom_max = std::max(nom_max, z.norm());
        c.note("nominal failed after " + std::to_string(nom.steps()) + " steps (max |z| " +
               format_double(nom_max) + ")");

        cfg.steps = 2000;
        cfg.controller.kind = ControllerKind::SelfReflective;
        cfg.controller.alpha = 1.0;
        cfg.solver.tol = 1e-6;
        const ClosedLoopTrace sr = run_self_reflective(model, noise, cfg);
        c.require(!sr.diverged && !sr.solver_failed,
                  "self-reflective closed loop diverged under noise");
        double sr_max = 0.0;
        for (const Vec& z : sr.z) sr_max = std::max(sr_max, z.norm());
        c.note("self-reflective bounded over " + std::to_string(sr.steps()) +
               " steps (max |z| " + format_double(sr_max) + ")");
    }

    if (!quantitative_ok) {
        // Reduced-preset diagnostic, as the committed fallback.
        const double delta_r = 0.05;
        const int N_r = 200;
        BenchmarkParams bpr;
        bpr.delta = delta_r;
        const Model model_r = instantiate_benchmark("predator_prey", bpr);
        const NoiseSpec noise_r = predator_noise(delta_r);
        std::ostringstream diag;
        diag << "QUANTITATIVE BAND MISSED (+-15% of {2.94, 2.84, 2.80}); paper-exact values:";
        for (size_t i = 0; i < alphas.size(); ++i) {
            diag << " " << format_double(expected_losses[i]);
        }
        diag << "; reduced preset (delta=0.05, N=200):";
        std::optional<std::vector<Vec>> warm_r;
        for (double alpha : alphas) {
            SrConfig cfgr;
            cfgr.alpha = alpha;
            cfgr.horizon = N_r;
            cfgr.solver.tol = 1e-6;
            cfgr.solver.max_iterations = 3000;
            cfgr.solver.warm_start = warm_r;
            OcpSolution sol =
                solve_self_reflective(model_r, y0, CovarianceState(sigma0), cfgr, noise_r);
            warm_r = sol.trajectory.u;
            CompensatedSum total;
            for (double s : sol.stage_losses) total.add(s);
            diag << " " << format_double(total.value());
        }
        c.note(diag.str());
        if (!opts.out_dir.empty()) {
            write_text_atomic((std::filesystem::path(opts.out_dir) /
                               "criterion9_quantitative_diagnostic.txt")
                                  .string(),
                              diag.str() + "\n");
        }
    } else {
        c.note("expected losses within +-15% of the reference values");
    }

    return {9, "Predator-prey case study (paper-exact preset)", c.ok, c.detail.str(), 0.0};
}

// ---------------------------------------------------------------------------
// 10. Determinism
// ---------------------------------------------------------------------------
CriterionResult criterion_10(const AcceptanceOptions& opts) {
    Check c;
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(opts.out_dir.empty() ? "acceptance_out" : opts.out_dir) /
                         "determinism";
    fs::create_directories(dir);

    const std::string config = R"({
  "benchmark": {"name": "predator_prey", "delta": 0.05},
  "noise": {"W": {"diag": [5e-4, 5e-4, 1.25e-3]}, "V": [[20.0]]},
  "sim": {
    "steps": 25,
    "horizon": 40,
    "x0_star": [1.0, 1.0, 0.5],
    "y0": [1.0, 1.0, 0.5],
    "sigma0": {"diag": [0.1, 0.1, 0.1]},
    "controllers": [{"type": "nominal"}, {"type": "self_reflective", "alpha": 1.0}],
    "seed": 31,
    "solver": {"tol": 1e-6, "max_iterations": 400}
  },
  "output": {"dir": "OUTDIR", "prefix": "det"}
}
)";

    auto run_into = [&](const std::string& sub) -> std::vector<std::string> {
        const fs::path out = dir / sub;
        std::string cfg = config;
        const std::string key = "OUTDIR";
        cfg.replace(cfg.find(key), key.size(), out.string());
        const fs::path cfg_path = dir / (sub + ".json");
        write_text_atomic(cfg_path.string(), cfg);
        if (cmd_simulate(cfg_path.string()) != 0) {
            c.require(false, "cmd_simulate failed for " + sub);
            return {};
        }
        std::vector<std::string> contents;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(out)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            contents.push_back(ss.str());
        }
        return contents;
    };

    const auto a = run_into("run_a");
    const auto b = run_into("run_b");
    c.require(!a.empty() && a.size() == b.size(), "trace CSVs missing");
    for (size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        c.require(a[i] == b[i], "trace CSV " + std::to_string(i) + " differs between runs");
    }
    c.note(std::to_string(a.size()) + " trace files byte-identical across repeated runs");
    return {10, "Determinism: repeated runs produce byte-identical traces", c.ok,
            c.detail.str(), 0.0};
}

using CriterionFn = CriterionResult (*)(const AcceptanceOptions&);

struct Entry {
    int id;
    CriterionFn fn;
    double budget_seconds;
};

const Entry kCriteria[] = {
    {1, criterion_1, 5.0},       {2, criterion_2, 60.0},   {3, criterion_3, 600.0},
    {4, criterion_4, 300.0},     {5, criterion_5, 1800.0}, {6, criterion_6, 600.0},
    {7, criterion_7, 600.0},     {8, criterion_8, 1200.0}, {9, criterion_9, 7200.0},
    {10, criterion_10, 300.0},
};

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
    std::vector<CriterionResult> results;
    for (const Entry& entry : kCriteria) {
        if (!opts.criteria.empty() &&
            std::find(opts.criteria.begin(), opts.criteria.end(), entry.id) ==
                opts.criteria.end()) {
            continue;
        }
        const auto t0 = Clock::now();
        CriterionResult r;
        try {
            r = entry.fn(opts);
        } catch (const std::exception& e) {
            r.id = entry.id;
            r.name = "criterion " + std::to_string(entry.id);
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (r.passed && r.seconds > entry.budget_seconds) {
            r.passed = false;
            r.detail += " FAILED: runtime " + format_double(r.seconds) + " s over budget " +
                        format_double(entry.budget_seconds) + " s";
        }
        results.push_back(std::move(r));
    }
    return results;
}

int run_acceptance_and_report(const AcceptanceOptions& opts) {
    const std::vector<CriterionResult> results = run_acceptance(opts);
    int failures = 0;
    for (const CriterionResult& r : results) {
        std::printf("[%s] %2d: %s (%.1f s)\n", r.passed ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds);
        if (!r.detail.empty()) std::printf("         %s\n", r.detail.c_str());
        if (!r.passed) ++failures;
    }
    std::printf("%zu criteria run, %d failed\n", results.size(), failures);
    return failures;
}

}  // namespace srmpc::validation

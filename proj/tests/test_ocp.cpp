#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srmpc/ocp.hpp"
#include "srmpc/rng.hpp"
#include "srmpc/validation/oracles.hpp"

#include <chrono>

using namespace srmpc;
using namespace srmpc::validation;

namespace {

NoiseSpec motivating_noise() {
    Mat V(1, 1);
    V(0, 0) = 0.05;
    return NoiseSpec::bounded(0.01 * Mat::Identity(2, 2), V);
}

}  // namespace

TEST_CASE("rollout: fixed point, closed form, and divergence reporting") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model predator = instantiate_benchmark("predator_prey", bp);
    {
        const int N = 20;
        const Trajectory traj =
            rollout(predator, predator_steady_state(), std::vector<Vec>(N, Vec::Zero(1)),
                    std::vector<Vec>(N, Vec::Zero(3)));
        for (const Vec& z : traj.x) {
            CHECK((z - predator_steady_state()).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    {
        // linear model matches the explicit power-series form
        RngStream rng(41);
        const LqInstance lq = random_lq_instance(rng);
        const Model model = lq.model();
        const int N = 15;
        std::vector<Vec> u(N), w(N);
        for (int k = 0; k < N; ++k) {
            u[k] = random_vector(rng, lq.n_u, 0.4);
            w[k] = random_vector(rng, lq.n_x, 0.1);
        }
        const Vec x0 = random_vector(rng, lq.n_x);
        const Trajectory traj = rollout(model, x0, u, w);
        Vec expected = x0;
        for (int k = 0; k < N; ++k) {
            expected = lq.A * expected + lq.B * u[k] + w[k];
            CHECK((traj.x[k + 1] - expected).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    {
        // oscillatory response from an off-equilibrium start stays finite
        const int N = 1000;
        const Vec z0 = (Vec(3) << 1.2, 1.0, 0.5).finished();
        const Trajectory traj = rollout(predator, z0, std::vector<Vec>(N, Vec::Zero(1)),
                                        std::vector<Vec>(N, Vec::Zero(3)));
        double zmax = 0.0, zmin = 1e9;
        for (const Vec& z : traj.x) {
            zmax = std::max(zmax, z(0));
            zmin = std::min(zmin, z(0));
        }
        CHECK(zmax < 3.0);
        CHECK(zmin > 0.3);
        CHECK(zmax > 1.2);  // actually oscillates
    }
    {
        // non-finite state reports the stage
        Model bad = instantiate_benchmark("predator_prey", bp);
        bad.f = [](const Vec& z, const Vec&) {
            return Vec(z * 1e200);  // overflows after a couple of steps
        };
        try {
            rollout(bad, Vec::Ones(3), std::vector<Vec>(5, Vec::Zero(1)),
                    std::vector<Vec>(5, Vec::Zero(3)));
            CHECK(false);
        } catch (const DivergenceError& e) {
            CHECK(e.stage() >= 0);
        }
    }
    CHECK_THROWS_AS(rollout(predator, Vec::Ones(3), std::vector<Vec>(3, Vec::Zero(1)),
                            std::vector<Vec>(2, Vec::Zero(3))),
                    std::invalid_argument);
}

TEST_CASE("solve_nominal: first control equals LQR feedback") {
    RngStream rng(42);
    for (int inst = 0; inst < 5; ++inst) {
        const LqInstance lq = random_lq_instance(rng);
        const Model model = lq.model();
        const int N = 5 + static_cast<int>(rng.next_u64() % 15);
        const Vec x0 = random_vector(rng, lq.n_x);
        SolverOptions opts;
        opts.tol = 1e-12;
        opts.max_iterations = 4000;
        const OcpSolution sol =
            solve_nominal(model, x0, std::vector<Vec>(N, Vec::Zero(lq.n_x)), opts);
        const auto P = riccati_oracle(lq.A, lq.B, lq.Q, lq.R, lq.S, lq.P_terminal, N);
        const Vec expected = -lqr_gain(lq.A, lq.B, lq.R, lq.S, P[1]) * x0;
        CHECK((sol.trajectory.u.front() - expected).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("solve_nominal: one-step analytic minimizer") {
    // l = 0, m = |x|^2, f = x + u: u0 = -x0
    BenchmarkParams bp;
    bp.A = Mat::Identity(2, 2);
    bp.B = Mat::Identity(2, 2);
    bp.Q = Mat::Zero(2, 2);
    bp.R = Mat::Zero(2, 2);
    bp.P = 2.0 * Mat::Identity(2, 2);
    const Model model = instantiate_benchmark("lq_custom", bp);
    const Vec x0 = (Vec(2) << 0.7, -1.3).finished();
    SolverOptions opts;
    opts.tol = 1e-12;
    const OcpSolution sol = solve_nominal(model, x0, {Vec::Zero(2)}, opts);
    CHECK((sol.trajectory.u.front() + x0).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(sol.objective <= 1e-12);
}

TEST_CASE("solve_nominal: known disturbances match the affine-LQR closed form") {
    RngStream rng(43);
    const LqInstance lq = random_lq_instance(rng, 3);
    const Model model = lq.model();
    const int N = 12;
    std::vector<Vec> w(N);
    for (auto& wk : w) wk = random_vector(rng, lq.n_x, 0.3);
    const Vec x0 = random_vector(rng, lq.n_x);
    SolverOptions opts;
    opts.tol = 1e-12;
    opts.max_iterations = 4000;
    const OcpSolution sol = solve_nominal(model, x0, w, opts);

    const AffineLqr oracle =
        affine_lqr_oracle(lq.A, lq.B, lq.Q, lq.R, lq.S, lq.P_terminal, w);
    CHECK(sol.objective == doctest::Approx(oracle.value(0, x0)).epsilon(1e-9));
    // optimal first control too
    const Vec u0 = oracle.control(lq.A, lq.B, lq.R, lq.S, w[0], 0, x0);
    CHECK((sol.trajectory.u.front() - u0).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("solve_nominal: iteration exhaustion returns the best iterate unflagged") {
    RngStream rng(44);
    const LqInstance lq = random_lq_instance(rng);
    const Model model = lq.model();
    SolverOptions opts;
    opts.tol = 1e-14;
    opts.max_iterations = 2;
    const OcpSolution sol = solve_nominal(model, random_vector(rng, lq.n_x),
                                          std::vector<Vec>(20, Vec::Zero(lq.n_x)), opts);
    CHECK(!sol.converged);
    CHECK(sol.iterations <= 2);
    CHECK(std::isfinite(sol.objective));
}

TEST_CASE("sr_objective: alpha = 0 reproduces the nominal objective bit-exactly") {
    BenchmarkParams bp;
    bp.delta = 0.08;
    const Model model = instantiate_benchmark("motivating_example", bp);
    const NoiseSpec noise = motivating_noise();
    RngStream rng(45);
    const Vec x0 = random_vector(rng, 2, 0.8);
    const CovarianceState sig(0.05 * Mat::Identity(2, 2));
    const int N = 12;
    std::vector<Vec> u(N);
    for (auto& uk : u) uk = random_vector(rng, 2, 0.4);

    const SrEvaluation e = sr_objective(model, x0, sig, u, 0.0, noise);
    const Trajectory traj = rollout(model, x0, u, std::vector<Vec>(N, Vec::Zero(2)));
    double nominal = 0.0;
    for (int k = 0; k < N; ++k) nominal += model.l(traj.x[k], traj.u[k]);
    nominal += model.m(traj.x.back());
    CHECK(e.objective == nominal);
    CHECK(e.loss == 0.0);
    CHECK(e.sigma.size() == static_cast<size_t>(N) + 1);
    CHECK(e.omega.size() == static_cast<size_t>(N) + 1);
    CHECK(e.phi.size() == static_cast<size_t>(N));
}

TEST_CASE("sr_objective: zero initial variance and zero process noise kill the loss") {
    BenchmarkParams bp;
    bp.delta = 0.08;
    const Model model = instantiate_benchmark("motivating_example", bp);
    NoiseSpec noise;
    noise.W = Mat::Zero(2, 2);
    noise.V = Mat::Constant(1, 1, 0.05);
    noise.gamma = 1.0;
    RngStream rng(46);
    const int N = 10;
    std::vector<Vec> u(N);
    for (auto& uk : u) uk = random_vector(rng, 2, 0.4);
    const SrEvaluation e =
        sr_objective(model, random_vector(rng, 2), CovarianceState(Mat::Zero(2, 2)), u, 2.0,
                     noise);
    CHECK(e.loss == 0.0);
    for (double s : e.stage_losses) CHECK(s == 0.0);
}

TEST_CASE("sr_objective: loss part is control-independent on LQ models") {
    RngStream rng(47);
    const LqInstance lq = random_lq_instance(rng, 3);
    const Model model = lq.model();
    const NoiseSpec noise = NoiseSpec::bounded(
        random_psd(rng, lq.n_x, 0.02),
        random_psd(rng, lq.n_h, 0.05) + 0.01 * Mat::Identity(lq.n_h, lq.n_h));
    const CovarianceState sig(random_psd(rng, lq.n_x, 0.1));
    const Vec x0 = random_vector(rng, lq.n_x);
    const int N = 10;

    double reference = -1.0;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Vec> u(N);
        for (auto& uk : u) uk = random_vector(rng, lq.n_u, 0.6);
        const SrEvaluation e = sr_objective(model, x0, sig, u, 1.0, noise);
        if (trial == 0) {
            reference = e.loss;
        } else {
            CHECK(e.loss == doctest::Approx(reference).epsilon(1e-12));
        }
    }
}

TEST_CASE("sr_gradient: matches central differences on the bilinear example") {
    BenchmarkParams bp;
    bp.delta = 0.1;
    const Model model = instantiate_benchmark("motivating_example", bp);
    const NoiseSpec noise = motivating_noise();
    RngStream rng(48);
    const Vec x0 = random_vector(rng, 2, 0.8);
    const CovarianceState sig(random_psd(rng, 2, 0.05));
    const int N = 10;
    std::vector<Vec> u(N);
    for (auto& uk : u) uk = random_vector(rng, 2, 0.3);

    const auto g = sr_gradient(model, x0, sig, u, 1.0, noise);
    const auto g_fd = fd_control_gradient(
        [&](const std::vector<Vec>& uu) {
            return sr_objective(model, x0, sig, uu, 1.0, noise).objective;
        },
        u);
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < g.size(); ++k) {
        num += (g[k] - g_fd[k]).squaredNorm();
        den += g_fd[k].squaredNorm();
    }
    CHECK(std::sqrt(num) / (1e-12 + std::sqrt(den)) <= 1e-5);
}

TEST_CASE("sr_gradient: alpha = 0 equals the rollout adjoint; LQ loss gradient vanishes") {
    RngStream rng(49);
    {
        BenchmarkParams bp;
        bp.delta = 0.1;
        const Model model = instantiate_benchmark("motivating_example", bp);
        const NoiseSpec noise = motivating_noise();
        const Vec x0 = random_vector(rng, 2, 0.8);
        const CovarianceState sig(random_psd(rng, 2, 0.05));
        const int N = 8;
        std::vector<Vec> u(N);
        for (auto& uk : u) uk = random_vector(rng, 2, 0.3);
        const auto g0 = sr_gradient(model, x0, sig, u, 0.0, noise);
        const auto g_fd = fd_control_gradient(
            [&](const std::vector<Vec>& uu) {
                return sr_objective(model, x0, sig, uu, 0.0, noise).nominal;
            },
            u);
        for (size_t k = 0; k < g0.size(); ++k) {
            CHECK((g0[k] - g_fd[k]).cwiseAbs().maxCoeff() <= 1e-7);
        }
    }
    {
        const LqInstance lq = random_lq_instance(rng, 3);
        const Model model = lq.model();
        const NoiseSpec noise = NoiseSpec::bounded(
            random_psd(rng, lq.n_x, 0.02),
            random_psd(rng, lq.n_h, 0.05) + 0.01 * Mat::Identity(lq.n_h, lq.n_h));
        const CovarianceState sig(random_psd(rng, lq.n_x, 0.1));
        const Vec x0 = random_vector(rng, lq.n_x);
        const int N = 8;
        std::vector<Vec> u(N);
        for (auto& uk : u) uk = random_vector(rng, lq.n_u, 0.5);
        const auto g1 = sr_gradient(model, x0, sig, u, 1.0, noise);
        const auto g0 = sr_gradient(model, x0, sig, u, 0.0, noise);
        double diff = 0.0;
        for (size_t k = 0; k < g1.size(); ++k) diff += (g1[k] - g0[k]).squaredNorm();
        CHECK(std::sqrt(diff) <= 1e-9);
    }
}

TEST_CASE("solve_self_reflective: alpha = 0 matches the nominal solve") {
    BenchmarkParams bp;
    bp.delta = 0.08;
    const Model model = instantiate_benchmark("motivating_example", bp);
    const NoiseSpec noise = motivating_noise();
    const Vec x0 = (Vec(2) << 0.9, 0.4).finished();
    SrConfig cfg;
    cfg.alpha = 0.0;
    cfg.horizon = 12;
    cfg.solver.tol = 1e-10;
    cfg.solver.max_iterations = 2000;
    const OcpSolution sr =
        solve_self_reflective(model, x0, CovarianceState(0.05 * Mat::Identity(2, 2)), cfg, noise);
    SolverOptions nom_opts = cfg.solver;
    const OcpSolution nom =
        solve_nominal(model, x0, std::vector<Vec>(12, Vec::Zero(2)), nom_opts);
    CHECK(sr.converged);
    CHECK(nom.converged);
    for (int k = 0; k < 12; ++k) {
        CHECK((sr.trajectory.u[k] - nom.trajectory.u[k]).cwiseAbs().maxCoeff() <= 1e-10);
    }
    CHECK(sr.stage_losses.size() == 12);
}

TEST_CASE("solve_self_reflective: LQ minimizer is independent of alpha") {
    RngStream rng(50);
    const LqInstance lq = random_lq_instance(rng, 3);
    const Model model = lq.model();
    const NoiseSpec noise = NoiseSpec::bounded(
        random_psd(rng, lq.n_x, 0.02),
        random_psd(rng, lq.n_h, 0.05) + 0.01 * Mat::Identity(lq.n_h, lq.n_h));
    const Vec x0 = random_vector(rng, lq.n_x);
    const CovarianceState sig(random_psd(rng, lq.n_x, 0.1));

    SrConfig cfg;
    cfg.horizon = 10;
    cfg.solver.tol = 1e-10;
    cfg.solver.max_iterations = 4000;
    cfg.alpha = 0.0;
    const OcpSolution base = solve_self_reflective(model, x0, sig, cfg, noise);
    cfg.alpha = 2.5;
    const OcpSolution shifted = solve_self_reflective(model, x0, sig, cfg, noise);
    for (int k = 0; k < 10; ++k) {
        CHECK((base.trajectory.u[k] - shifted.trajectory.u[k]).cwiseAbs().maxCoeff() <= 1e-7);
    }
}

TEST_CASE("solver: accepted objectives are non-increasing and stagewise stationary") {
    BenchmarkParams bp;
    bp.delta = 0.08;
    const Model model = instantiate_benchmark("motivating_example", bp);
    const NoiseSpec noise = motivating_noise();
    const Vec x0 = (Vec(2) << 1.1, 0.4).finished();
    SrConfig cfg;
    cfg.alpha = 1.0;
    cfg.horizon = 12;
    cfg.solver.tol = 1e-10;
    cfg.solver.max_iterations = 3000;
    const OcpSolution sol =
        solve_self_reflective(model, x0, CovarianceState(0.05 * Mat::Identity(2, 2)), cfg, noise);
    CHECK(sol.converged);
    for (size_t i = 1; i < sol.objective_history.size(); ++i) {
        // non-increasing up to the documented roundoff tie-break
        CHECK(sol.objective_history[i] <=
              sol.objective_history[i - 1] +
                  1e-13 * (1.0 + std::abs(sol.objective_history[i - 1])));
    }

    // stagewise stationarity of a converged nominal solve: perturbing any
    // single stage control does not reduce the objective to first order
    SolverOptions opts;
    opts.tol = 1e-12;
    opts.max_iterations = 4000;
    const OcpSolution nom = solve_nominal(model, x0, std::vector<Vec>(12, Vec::Zero(2)), opts);
    CHECK(nom.converged);
    auto objective_of = [&](const std::vector<Vec>& uu) {
        const Trajectory traj = rollout(model, x0, uu, std::vector<Vec>(12, Vec::Zero(2)));
        double total = 0.0;
        for (int k = 0; k < 12; ++k) total += model.l(traj.x[k], traj.u[k]);
        return total + model.m(traj.x.back());
    };
    const double h = 1e-5;
    for (int k = 0; k < 12; ++k) {
        for (int i = 0; i < 2; ++i) {
            std::vector<Vec> up = nom.trajectory.u;
            std::vector<Vec> um = nom.trajectory.u;
            up[k](i) += h;
            um[k](i) -= h;
            const double deriv = (objective_of(up) - objective_of(um)) / (2.0 * h);
            CHECK(std::abs(deriv) <= 1e-6);
        }
    }
}

TEST_CASE("solver cost scales linearly with the horizon") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model model = instantiate_benchmark("predator_prey", bp);
    Mat W = Mat::Zero(3, 3);
    W(0, 0) = 1e-4;
    W(1, 1) = 1e-4;
    W(2, 2) = 2.5e-4;
    const NoiseSpec noise = NoiseSpec::bounded(W, Mat::Constant(1, 1, 100.0));
    const CovarianceState sig(0.1 * Mat::Identity(3, 3));

    auto timed_iterations = [&](int horizon) {
        // fixed small iteration budget; measures per-iteration sweep cost
        SrConfig cfg;
        cfg.alpha = 1.0;
        cfg.horizon = horizon;
        cfg.solver.tol = 1e-14;
        cfg.solver.max_iterations = 6;
        const auto t0 = std::chrono::steady_clock::now();
        solve_self_reflective(model, predator_steady_state(), sig, cfg, noise);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    timed_iterations(250);  // warm up caches
    const double t1 = timed_iterations(400);
    const double t2 = timed_iterations(800);
    CHECK(t2 <= 2.5 * t1 + 0.05);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srmpc/estimator.hpp"
#include "srmpc/model.hpp"
#include "srmpc/rng.hpp"
#include "srmpc/validation/oracles.hpp"

using namespace srmpc;
using namespace srmpc::validation;

namespace {

Model scalar_model(double a, double c) {
    BenchmarkParams bp;
    bp.A = Mat::Constant(1, 1, a);
    bp.B = Mat::Constant(1, 1, 1.0);
    bp.C = Mat::Constant(1, 1, c);
    bp.Q = Mat::Constant(1, 1, 1.0);
    bp.R = Mat::Constant(1, 1, 1.0);
    return instantiate_benchmark("lq_custom", bp);
}

NoiseSpec scalar_noise(double w, double v) {
    return NoiseSpec::bounded(Mat::Constant(1, 1, w), Mat::Constant(1, 1, v));
}

}  // namespace

TEST_CASE("ekf_mean_update: zero innovation reduces to pure propagation") {
    BenchmarkParams bp;
    bp.delta = 0.05;
    const Model model = instantiate_benchmark("predator_prey", bp);
    RngStream rng(21);
    const Vec y = predator_steady_state() + random_vector(rng, 3, 0.1);
    const Vec u = random_vector(rng, 1, 0.2);
    NoiseSpec pn;
    pn.W = 0.01 * Mat::Identity(3, 3);
    pn.V = Mat::Constant(1, 1, 0.1);
    pn.gamma = 1.0;
    const CovarianceState sig(0.2 * Mat::Identity(3, 3));

    const Vec eta = model.h(y);  // innovation vanishes
    CHECK((ekf_mean_update(model, u, y, sig, eta, pn) - model.f(y, u)).cwiseAbs().maxCoeff() <=
          1e-14);

    // zero covariance: zero gain regardless of the measurement
    const CovarianceState zero_sig(Mat::Zero(3, 3));
    const Vec eta_off = eta + Vec::Constant(1, 3.0);
    CHECK((ekf_mean_update(model, u, y, zero_sig, eta_off, pn) - model.f(y, u))
              .cwiseAbs()
              .maxCoeff() <= 1e-14);
}

TEST_CASE("ekf_mean_update: scalar closed form") {
    // f = x, h = x, Sigma = 1, V = 1, y = 0, eta = 1 -> 0.5
    Model mo;
    mo.n_x = 1;
    mo.n_u = 1;
    mo.n_h = 1;
    mo.f = [](const Vec& x, const Vec&) { return x; };
    mo.h = [](const Vec& x) { return x; };
    mo.l = [](const Vec&, const Vec&) { return 0.0; };
    mo.m = [](const Vec&) { return 0.0; };
    mo.h_x = [](const Vec&) { return Mat::Identity(1, 1); };
    const CovarianceState sig(Mat::Identity(1, 1));
    const NoiseSpec noise = scalar_noise(0.0, 1.0);
    const Vec out = ekf_mean_update(mo, Vec::Zero(1), Vec::Zero(1), sig, Vec::Ones(1), noise);
    CHECK(out(0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("ekf_cov_update: scalar hand values") {
    {
        // C = 0: correction vanishes, pure propagation 2^2 * 1 + 1 = 5
        const Model model = scalar_model(2.0, 0.0);
        const NoiseSpec noise = scalar_noise(1.0, 0.5);
        const CovarianceState out = ekf_cov_update(model, Vec::Zero(1), Vec::Zero(1),
                                                   CovarianceState(Mat::Identity(1, 1)), noise);
        CHECK(out.sigma(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
    }
    {
        // A = 1, C = 1, Sigma = 1, V = 1, W = 0 -> 1 - 1/2 = 0.5
        const Model model = scalar_model(1.0, 1.0);
        const NoiseSpec noise = scalar_noise(0.0, 1.0);
        const CovarianceState out = ekf_cov_update(model, Vec::Zero(1), Vec::Zero(1),
                                                   CovarianceState(Mat::Identity(1, 1)), noise);
        CHECK(out.sigma(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("ekf_cov_update matches the textbook Kalman filter on linear models") {
    RngStream rng(22);
    for (int inst = 0; inst < 4; ++inst) {
        LqInstance lq = random_lq_instance(rng);
        lq.A *= 0.9;
        const Model model = lq.model();
        NoiseSpec noise = NoiseSpec::bounded(
            random_psd(rng, lq.n_x, 0.05),
            random_psd(rng, lq.n_h, 0.1) + 0.01 * Mat::Identity(lq.n_h, lq.n_h));
        CovarianceState sig(random_psd(rng, lq.n_x, 0.3));
        Mat oracle = sig.sigma;
        const Vec u = Vec::Zero(lq.n_u);
        for (int k = 0; k < 100; ++k) {
            sig = ekf_cov_update(model, Vec::Zero(lq.n_x), u, sig, noise);
            oracle = kalman_oracle_step(lq.A, lq.C, noise.W, noise.V, oracle);
            CHECK((sig.sigma - oracle).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("ekf_cov_update output dominates the process noise") {
    RngStream rng(23);
    for (int i = 0; i < 50; ++i) {
        LqInstance lq = random_lq_instance(rng, 3);
        const Model model = lq.model();
        const NoiseSpec noise =
            NoiseSpec::bounded(random_psd(rng, lq.n_x, 0.1), random_psd(rng, lq.n_h, 0.1));
        const CovarianceState sig(random_psd(rng, lq.n_x, 0.5));
        const CovarianceState out =
            ekf_cov_update(model, Vec::Zero(lq.n_x), Vec::Zero(lq.n_u), sig, noise);
        CHECK(min_eigenvalue_sym(out.sigma - noise.W) >= -1e-10);
    }
}

TEST_CASE("scalar covariance update is monotone in the prior variance") {
    RngStream rng(24);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.normal();
        const double c = rng.normal();
        const double w = 0.5 * rng.uniform();
        const double v = 0.1 + rng.uniform();
        const Model model = scalar_model(a, c);
        const NoiseSpec noise = scalar_noise(w, v);
        const double sa = rng.uniform();
        const double sb = sa + rng.uniform();
        const double ua = ekf_cov_update(model, Vec::Zero(1), Vec::Zero(1),
                                         CovarianceState(Mat::Constant(1, 1, sa)), noise)
                              .sigma(0, 0);
        const double ub = ekf_cov_update(model, Vec::Zero(1), Vec::Zero(1),
                                         CovarianceState(Mat::Constant(1, 1, sb)), noise)
                              .sigma(0, 0);
        CHECK(ua <= ub + 1e-12);
    }
}

TEST_CASE("predict_variance_sequence: composition and edge cases") {
    RngStream rng(25);
    LqInstance lq = random_lq_instance(rng);
    const Model model = lq.model();
    const NoiseSpec noise = NoiseSpec::bounded(
        random_psd(rng, lq.n_x, 0.05),
        random_psd(rng, lq.n_h, 0.1) + 0.01 * Mat::Identity(lq.n_h, lq.n_h));
    const CovarianceState sig0(random_psd(rng, lq.n_x, 0.2));

    // empty horizon
    const auto only = predict_variance_sequence(model, {Vec::Zero(lq.n_x)}, {}, sig0, noise);
    CHECK(only.size() == 1);
    CHECK((only[0].sigma - sig0.sigma).cwiseAbs().maxCoeff() == 0.0);

    // N-fold composition is bit-exact
    const int N = 20;
    std::vector<Vec> x_plan(N + 1, Vec::Zero(lq.n_x));
    std::vector<Vec> u_plan(N, Vec::Zero(lq.n_u));
    const auto seq = predict_variance_sequence(model, x_plan, u_plan, sig0, noise);
    CovarianceState composed = sig0;
    for (int k = 0; k < N; ++k) {
        composed = ekf_cov_update(model, x_plan[k], u_plan[k], composed, noise);
        CHECK((seq[k + 1].sigma - composed.sigma).cwiseAbs().maxCoeff() == 0.0);
    }

    CHECK_THROWS_AS(predict_variance_sequence(model, x_plan, x_plan, sig0, noise),
                    std::invalid_argument);
}

TEST_CASE("variance of the unobservable state grows along a zero-control plan") {
    BenchmarkParams bp;
    bp.delta = 0.02;
    const Model model = instantiate_benchmark("motivating_example", bp);
    NoiseSpec noise;
    noise.W = 1e-4 * Mat::Identity(2, 2);
    noise.V = Mat::Constant(1, 1, 0.01);
    noise.gamma = 1.0;

    const int N = 50;
    std::vector<Vec> x_plan(N + 1, Vec::Zero(2));
    std::vector<Vec> u_plan(N, Vec::Zero(2));
    const auto seq =
        predict_variance_sequence(model, x_plan, u_plan, CovarianceState(0.1 * Mat::Identity(2, 2)), noise);
    for (int k = 0; k < N; ++k) {
        CHECK(seq[k + 1].sigma(0, 0) > seq[k].sigma(0, 0));
    }
}

TEST_CASE("noise spec support consistency and scaling") {
    NoiseSpec n = NoiseSpec::bounded(0.04 * Mat::Identity(2, 2), Mat::Constant(1, 1, 0.01));
    CHECK(n.gamma == doctest::Approx(4.0 * 0.2));
    CHECK(n.support_consistent());
    CHECK(n.w_radius() == doctest::Approx(0.8));
    CHECK(n.v_radius() == doctest::Approx(0.4));

    const NoiseSpec half = n.scaled(0.5);
    CHECK(half.gamma == doctest::Approx(0.5 * n.gamma));
    CHECK(half.W(0, 0) == doctest::Approx(0.25 * n.W(0, 0)));

    n.gamma = 0.01;  // declared support too small for the second moments
    CHECK(!n.support_consistent());
}

TEST_CASE("covariance state validation") {
    CHECK_THROWS_AS(CovarianceState(Mat::Ones(2, 3)), std::invalid_argument);
    Mat skew(2, 2);
    skew << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS(CovarianceState{skew}, std::invalid_argument);
    Mat indef = Mat::Identity(2, 2);
    indef(1, 1) = -0.5;
    CHECK_THROWS_AS(CovarianceState{indef}, std::invalid_argument);
    // slightly asymmetric input is symmetrized
    Mat near = Mat::Identity(2, 2);
    near(0, 1) = 1e-12;
    const CovarianceState ok(near);
    CHECK((ok.sigma - ok.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("singular innovation covariance goes through the pseudo-inverse") {
    // C = 0 and V = 0 make the innovation covariance singular; the update
    // must still be defined (zero gain).
    const Model model = scalar_model(1.5, 0.0);
    const NoiseSpec noise = scalar_noise(0.1, 0.0);
    const CovarianceState sig(Mat::Identity(1, 1));
    const CovarianceState out =
        ekf_cov_update(model, Vec::Zero(1), Vec::Zero(1), sig, noise);
    CHECK(out.sigma(0, 0) == doctest::Approx(1.5 * 1.5 + 0.1));
}

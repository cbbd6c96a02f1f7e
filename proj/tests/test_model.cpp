#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srmpc/model.hpp"
#include "srmpc/rng.hpp"
#include "srmpc/validation/oracles.hpp"

using namespace srmpc;
using namespace srmpc::validation;

namespace {

Model scalar_bilinear() {
    // f(x, u) = x + u x, h = x, l = x^2 + u^2, m = 0
    Model mo;
    mo.name = "scalar_bilinear";
    mo.n_x = 1;
    mo.n_u = 1;
    mo.n_h = 1;
    mo.f = [](const Vec& x, const Vec& u) { return Vec(x + u(0) * x); };
    mo.h = [](const Vec& x) { return x; };
    mo.l = [](const Vec& x, const Vec& u) { return x(0) * x(0) + u(0) * u(0); };
    mo.m = [](const Vec&) { return 0.0; };
    return mo;
}

}  // namespace

TEST_CASE("eval_bundle: linear-quadratic model has zero second derivatives of f") {
    RngStream rng(11);
    const LqInstance lq = random_lq_instance(rng);
    const Model model = lq.model();
    const Vec x = random_vector(rng, lq.n_x);
    const Vec u = random_vector(rng, lq.n_u);
    const DerivativeBundle b = model.eval_bundle(x, u);

    CHECK((b.A - lq.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((b.B - lq.B).cwiseAbs().maxCoeff() == 0.0);
    for (const Mat& k : b.K) CHECK(k.cwiseAbs().maxCoeff() == 0.0);
    for (const Mat& l : b.L) CHECK(l.cwiseAbs().maxCoeff() == 0.0);
    for (const Mat& m : b.M) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eval_bundle: bilinear system matrix couples control and state") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model model = instantiate_benchmark("motivating_example", bp);
    const Vec x = (Vec(2) << 0.7, -0.3).finished();
    const Vec u = Vec::Zero(2);
    const DerivativeBundle b = model.eval_bundle(x, u);

    Mat a_expected = Mat::Identity(2, 2);
    a_expected(0, 0) += 0.01;
    a_expected(1, 1) -= 0.01;
    CHECK((b.A - a_expected).cwiseAbs().maxCoeff() <= 1e-15);

    // B = delta I + delta * dF/du * x contribution in the (2,2) slot
    CHECK(b.B(0, 0) == doctest::Approx(0.01));
    CHECK(b.B(1, 1) == doctest::Approx(0.01 * (1.0 + x(0))));
    CHECK(b.B(0, 1) == 0.0);
    CHECK(b.B(1, 0) == 0.0);

    // the only curvature of f sits in the u2-x1 cross slice
    CHECK(b.L[1](1, 0) == doctest::Approx(0.01));
    CHECK(b.L[0].cwiseAbs().maxCoeff() == 0.0);
    for (const Mat& k : b.K) CHECK(k.cwiseAbs().maxCoeff() == 0.0);
    for (const Mat& m : b.M) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eval_bundle: scalar f = x + ux at (1, 0)") {
    const Model model = scalar_bilinear();
    const Vec x = Vec::Ones(1);
    const Vec u = Vec::Zero(1);
    const DerivativeBundle b = model.eval_bundle(x, u);
    CHECK(b.A(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.B(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.K[0](0, 0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(b.L[0](0, 0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(b.M[0](0, 0) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("check_derivatives: exact on linear-quadratic models") {
    RngStream rng(12);
    const LqInstance lq = random_lq_instance(rng);
    const Model model = lq.model();
    const Vec x = random_vector(rng, lq.n_x);
    const Vec u = random_vector(rng, lq.n_u);
    const DerivativeCheck rep = check_derivatives(model, x, u, 1e-3);
    CHECK(rep.max_error() <= 1e-8);
}

TEST_CASE("check_derivatives: predator-prey analytic derivatives at the steady state") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model model = instantiate_benchmark("predator_prey", bp);
    const DerivativeCheck rep =
        check_derivatives(model, predator_steady_state(), Vec::Zero(1), 1e-5);
    CHECK(rep.max_error() <= 1e-6);
}

TEST_CASE("check_derivatives: an injected fault in A is flagged") {
    Model model = scalar_bilinear();
    model.f_x = [](const Vec&, const Vec& u) {
        Mat a(1, 1);
        a(0, 0) = 1.0 + u(0) + 1.0;  // off by one
        return a;
    };
    const DerivativeCheck rep = check_derivatives(model, Vec::Ones(1), Vec::Zero(1), 1e-5);
    CHECK(rep.A > 0.1);
    CHECK(rep.max_error() > 0.1);
}

TEST_CASE("check_derivatives: all built-in models at random points") {
    RngStream rng(13);
    BenchmarkParams bp;
    bp.delta = 0.05;
    const Model motivating = instantiate_benchmark("motivating_example", bp);
    const Model predator = instantiate_benchmark("predator_prey", bp);
    const LqInstance lq = random_lq_instance(rng);
    const Model lqm = lq.model();

    for (int i = 0; i < 100; ++i) {
        {
            const Vec x = random_vector(rng, 2);
            const Vec u = random_vector(rng, 2);
            CHECK(check_derivatives(motivating, x, u, 1e-5).max_error() <= 1e-5);
        }
        {
            const Vec z = predator_steady_state() + random_vector(rng, 3, 0.3);
            const Vec u = random_vector(rng, 1);
            CHECK(check_derivatives(predator, z, u, 1e-5).max_error() <= 1e-5);
        }
        {
            const Vec x = random_vector(rng, lq.n_x);
            const Vec u = random_vector(rng, lq.n_u);
            CHECK(check_derivatives(lqm, x, u, 1e-5).max_error() <= 1e-5);
        }
    }
}

TEST_CASE("tensor contractions are linear in the weight vector") {
    BenchmarkParams bp;
    bp.delta = 0.05;
    const Model model = instantiate_benchmark("predator_prey", bp);
    RngStream rng(14);
    const Vec z = predator_steady_state() + random_vector(rng, 3, 0.2);
    const Vec u = random_vector(rng, 1);
    const DerivativeBundle b = model.eval_bundle(z, u);

    for (int i = 0; i < 20; ++i) {
        const Vec p1 = random_vector(rng, 3);
        const Vec p2 = random_vector(rng, 3);
        const double a = rng.normal();
        const double c = rng.normal();
        const Vec mix = a * p1 + c * p2;
        CHECK((b.contract_K(mix) - a * b.contract_K(p1) - c * b.contract_K(p2))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
        CHECK((b.contract_L(mix) - a * b.contract_L(p1) - c * b.contract_L(p2))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
        CHECK((b.contract_M(mix) - a * b.contract_M(p1) - c * b.contract_M(p2))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
        const Mat kc = b.contract_K(mix);
        CHECK((kc - kc.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("instantiate_benchmark: motivating example constants") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model model = instantiate_benchmark("motivating_example", bp);
    CHECK(model.n_x == 2);
    CHECK(model.n_u == 2);
    CHECK(model.n_h == 1);
    const DerivativeBundle b = model.eval_bundle(Vec::Zero(2), Vec::Zero(2));
    CHECK(b.C(0, 0) == 0.0);
    CHECK(b.C(0, 1) == 1.0);
    // stage-cost Hessians carry the 2*delta scaling of the tracking term
    CHECK(b.Q(0, 0) == doctest::Approx(2.0 * 0.01));
    CHECK(b.Q(1, 1) == 0.0);
    CHECK((b.R - 2.0 * 0.01 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(b.S.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("instantiate_benchmark: the predator-prey steady state is a fixed point") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model model = instantiate_benchmark("predator_prey", bp);
    CHECK(model.n_x == 3);
    CHECK(model.n_u == 1);
    CHECK(model.n_h == 1);
    const Vec zs = predator_steady_state();
    CHECK((model.f(zs, Vec::Zero(1)) - zs).cwiseAbs().maxCoeff() <= 1e-14);

    // stays put over a long noise-free run
    Vec z = zs;
    for (int k = 0; k < 500; ++k) z = model.f(z, Vec::Zero(1));
    CHECK((z - zs).cwiseAbs().maxCoeff() <= 1e-12);

    // terminal cost is the quadratic form around the steady state
    const Mat pt = predator_terminal_weight(0.01);
    const Vec dz = (Vec(3) << 0.1, -0.05, 0.02).finished();
    CHECK(model.m(zs) == 0.0);
    CHECK(model.m(zs + dz) == doctest::Approx(dz.dot(pt * dz)).epsilon(1e-12));
    CHECK((model.hess_m(zs) - 2.0 * pt).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("instantiate_benchmark: lq_custom wires the parameter matrices through") {
    BenchmarkParams bp;
    bp.A = Mat::Identity(2, 2);
    bp.B = Mat::Identity(2, 2);
    bp.Q = Mat::Identity(2, 2);
    bp.R = Mat::Identity(2, 2);
    const Model model = instantiate_benchmark("lq_custom", bp);
    const DerivativeBundle b = model.eval_bundle(Vec::Ones(2), Vec::Ones(2));
    CHECK((b.A - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((b.B - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((b.Q - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((b.R - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("instantiate_benchmark: rejects unknown names and bad steps") {
    BenchmarkParams bp;
    CHECK_THROWS_AS(instantiate_benchmark("unknown", bp), std::invalid_argument);
    bp.delta = 0.0;
    CHECK_THROWS_AS(instantiate_benchmark("predator_prey", bp), std::invalid_argument);
    bp.delta = -1.0;
    CHECK_THROWS_AS(instantiate_benchmark("motivating_example", bp), std::invalid_argument);
}

TEST_CASE("eval_bundle rejects dimension mismatches") {
    BenchmarkParams bp;
    bp.delta = 0.01;
    const Model model = instantiate_benchmark("predator_prey", bp);
    CHECK_THROWS_AS(model.eval_bundle(Vec::Zero(2), Vec::Zero(1)), std::invalid_argument);
    CHECK_THROWS_AS(model.eval_bundle(Vec::Zero(3), Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("missing second derivatives fall back to finite differences") {
    Model mo = scalar_bilinear();
    // supply only values and first derivatives
    mo.f_x = [](const Vec&, const Vec& u) {
        Mat a(1, 1);
        a(0, 0) = 1.0 + u(0);
        return a;
    };
    mo.f_u = [](const Vec& x, const Vec&) {
        Mat b(1, 1);
        b(0, 0) = x(0);
        return b;
    };
    const DerivativeBundle b = mo.eval_bundle(Vec::Ones(1), (Vec(1) << 0.3).finished());
    CHECK(b.L[0](0, 0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(b.K[0](0, 0) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(b.Q(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(b.R(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("trajectory index accessors follow the overflow convention") {
    Trajectory traj;
    const int N = 4;
    for (int k = 0; k <= N; ++k) traj.x.push_back(Vec::Constant(1, k));
    for (int k = 0; k < N; ++k) {
        traj.u.push_back(Vec::Constant(1, 10 + k));
        traj.w.push_back(Vec::Constant(1, 20 + k));
    }
    traj.validate();
    CHECK(traj.x_upper(-1).empty());
    CHECK(traj.x_upper(0).size() == 1);
    CHECK(traj.x_upper(N).size() == static_cast<size_t>(N) + 1);
    CHECK(traj.u_lower(N).empty());
    CHECK(traj.w_lower(N).empty());
    CHECK(traj.u_lower(1).size() == static_cast<size_t>(N) - 1);
    CHECK(traj.u_lower(1).front()(0) == 11.0);

    traj.u.pop_back();
    CHECK_THROWS_AS(traj.validate(), std::invalid_argument);
}

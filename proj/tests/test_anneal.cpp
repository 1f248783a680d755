#include <doctest.h>

#include "cdjp/anneal.hpp"
#include "cdjp/config.hpp"

using namespace cdjp;

namespace {

// Small, fast shooting problem: vacuum to vacuum over a short window.
ShootingProblem trivial_problem(const OperatorSet& ops) {
    ShootingProblem p;
    Mat vac = Mat::Zero(ops.dim, ops.dim);
    vac(0, 0) = 1;
    p.rho0 = vac;
    p.rho_target = vac;
    p.tau = 15.0;
    p.t_f = 0.5;
    p.dt = 1e-3;
    p.lambda1_max = 0.2;
    p.fidelity_gate = 0.92;
    return p;
}

AnnealConfig fast_config() {
    AnnealConfig cfg;
    cfg.initial_temperature = 0.2;
    cfg.cooling_rate = 0.9;
    cfg.steps_per_temperature = 40;
    cfg.restarts = 2;
    cfg.max_evals_per_restart = 400;
    cfg.stall_levels = 4;
    cfg.temperature_floor = 1e-4;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("anneal");

TEST_CASE("problem and config validation") {
    const OperatorSet ops = build_operators(FockDim(8));
    ShootingProblem p = trivial_problem(ops);
    CHECK_NOTHROW(p.validate());
    p.rho_target = 0.5 * p.rho_target + 0.5 * Mat::Identity(8, 8) / 8.0;
    CHECK_THROWS_AS(p.validate(), NonPureInput);

    AnnealConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.cooling_rate = 1.2;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("problem hash distinguishes inputs") {
    const OperatorSet ops = build_operators(FockDim(8));
    const ShootingProblem a = trivial_problem(ops);
    ShootingProblem b = a;
    CHECK(a.hash() == b.hash());
    b.tau = 14.0;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("identity endpoints converge at the gate immediately") {
    const OperatorSet ops = build_operators(FockDim(12));
    const ShootingProblem p = trivial_problem(ops);
    const OptimalControlSolution sol = anneal_optimal(p, fast_config(), 2);
    CHECK(sol.converged);
    CHECK(sol.fidelity >= p.fidelity_gate);
    CHECK(sol.schedule.size() == 501);
    // every emitted lambda1 is a bang-bang value
    for (double l1 : sol.schedule.lambda1) CHECK(std::abs(l1) == doctest::Approx(0.2));
}

TEST_CASE("seeded determinism of the full solver") {
    const OperatorSet ops = build_operators(FockDim(10));
    const ShootingProblem p = trivial_problem(ops);
    const AnnealConfig cfg = fast_config();
    const OptimalControlSolution s1 = anneal_optimal(p, cfg, 2);
    const OptimalControlSolution s2 = anneal_optimal(p, cfg, 1);  // thread count irrelevant
    CHECK(s1.fidelity == s2.fidelity);
    CHECK(s1.j_cost == s2.j_cost);
    CHECK(s1.bundle0.g10 == s2.bundle0.g10);
    CHECK(s1.bundle0.k20 == s2.bundle0.k20);
    CHECK(s1.winning_restart == s2.winning_restart);

    AnnealConfig other = cfg;
    other.seed = 8;
    const OptimalControlSolution s3 = anneal_optimal(p, other, 2);
    CHECK(s3.seed != s1.seed);  // provenance reflects the configured seed
}

TEST_CASE("stored solution fields survive re-evaluation and JSON round-trip") {
    const OperatorSet ops = build_operators(FockDim(10));
    const ShootingProblem p = trivial_problem(ops);
    const OptimalControlSolution sol = anneal_optimal(p, fast_config(), 2);

    const Evaluation ev = evaluate_control(sol, p);
    CHECK(std::abs(ev.fidelity - sol.fidelity) < 1e-9);
    CHECK(std::abs(ev.j_cost - sol.j_cost) < 1e-9);

    const OptimalControlSolution back = OptimalControlSolution::from_json(sol.to_json());
    CHECK(back.fidelity == sol.fidelity);
    CHECK(back.j_cost == sol.j_cost);
    CHECK(back.bundle0.k02 == sol.bundle0.k02);
    CHECK(back.schedule.size() == sol.schedule.size());
    CHECK(back.schedule.theta == sol.schedule.theta);
    const Evaluation ev2 = evaluate_control(back, p);
    CHECK(std::abs(ev2.fidelity - sol.fidelity) < 1e-9);
}

TEST_CASE("fourier controls stay strictly inside their bounds") {
    FourierControl fc = FourierControl::zeros(5, 0.2, 3.0);
    fc.c[1] = 4.0;
    fc.d[3] = -7.0;
    fc.cp[0] = 2.5;
    fc.dp[5] = 9.0;
    for (int k = 0; k <= 300; ++k) {
        const auto [theta, l1] = fc.eval(k * 0.01);
        CHECK(std::abs(theta) <= M_PI / 2);
        CHECK(std::abs(l1) <= 0.2);  // tanh saturates to the bound at double precision
    }
    FourierControl mild = FourierControl::zeros(5, 0.2, 3.0);
    mild.c[1] = 0.5;
    mild.cp[2] = 0.1;
    for (int k = 0; k <= 30; ++k) {
        const auto [theta, l1] = mild.eval(k * 0.1);
        CHECK(std::abs(theta) < M_PI / 2);
        CHECK(std::abs(l1) < 0.2);
    }
    // flatten/unflatten round trip
    const std::vector<double> x = fc.flatten();
    const FourierControl back = FourierControl::unflatten(x, 5, 0.2, 3.0);
    CHECK(back.c == fc.c);
    CHECK(back.d == fc.d);
    CHECK(back.cp == fc.cp);
    CHECK(back.dp == fc.dp);

    // lambda1_max = 0 pins the potential off
    const FourierControl off = FourierControl::unflatten(x, 5, 0.0, 3.0);
    CHECK(off.eval(1.0).second == 0.0);
}

TEST_CASE("sample-control annealing on the trivial problem") {
    const OperatorSet ops = build_operators(FockDim(12));
    ShootingProblem p = trivial_problem(ops);
    p.fidelity_gate = 0.95;
    const SampleControlSolution sol = anneal_sample_control(p, fast_config(), 2);
    CHECK(sol.converged);
    CHECK(sol.fidelity >= 0.95);

    const Evaluation ev = evaluate_control(sol.control, p);
    CHECK(std::abs(ev.fidelity - sol.fidelity) < 1e-9);

    const SampleControlSolution back = SampleControlSolution::from_json(sol.to_json());
    CHECK(back.fidelity == sol.fidelity);
    const Evaluation ev2 = evaluate_control(back.control, p);
    CHECK(std::abs(ev2.fidelity - sol.fidelity) < 1e-9);
}

TEST_CASE("coefficient sensitivity is smooth") {
    const OperatorSet ops = build_operators(FockDim(12));
    const ShootingProblem p = trivial_problem(ops);
    FourierControl fc = FourierControl::zeros(5, 0.2, 3.0);
    fc.c[1] = 0.3;
    const double f0 = evaluate_control(fc, p).fidelity;
    fc.c[1] += 1e-6;
    const double f1 = evaluate_control(fc, p).fidelity;
    CHECK(std::abs(f1 - f0) > 0);
    CHECK(std::abs(f1 - f0) < 1e-3);
}

TEST_CASE("quadrature sign identification leaves the path invariant") {
    // shifting θ by π flips L to −L, which changes nothing physical
    const OperatorSet ops = build_operators(FockDim(12));
    const ShootingProblem p = trivial_problem(ops);
    ControlSchedule sched;
    sched.dt = 1e-3;
    const int n = 500;
    for (int k = 0; k <= n; ++k) {
        sched.theta.push_back(0.3 * std::sin(2 * M_PI * k / double(n)));
        sched.lambda1.push_back(k < n / 2 ? 0.2 : -0.2);
        sched.r.push_back(0);
    }
    ControlSchedule shifted = sched;
    for (double& th : shifted.theta) th += M_PI;
    const Evaluation e1 = evaluate_control(sched, p);
    const Evaluation e2 = evaluate_control(shifted, p);
    CHECK(e1.fidelity == doctest::Approx(e2.fidelity).epsilon(1e-10));
    CHECK(e1.j_cost == doctest::Approx(e2.j_cost).epsilon(1e-8));
}

TEST_CASE("theta0 boundary fit steers the means") {
    const OperatorSet ops = build_operators(FockDim(16));
    ShootingProblem p;
    Mat vac = Mat::Zero(16, 16);
    vac(0, 0) = 1;
    p.rho0 = vac;
    // displaced vacuum, reachable under position measurement backaction
    p.rho_target = make_state(ops, {StateKind::Coherent, {}, Complex(0.25, 0.1)});
    p.tau = 15.0;
    p.t_f = 1.0;
    p.dt = 1e-3;
    p.lambda1_max = 0.0;
    p.fidelity_gate = 0.97;
    AnnealConfig cfg = fast_config();
    cfg.max_evals_per_restart = 2500;
    cfg.stall_levels = 10;
    cfg.proposal_scale = {0.3, 0.3, 6.0, 6.0};
    const Theta0FitSolution fit = anneal_theta0(p, cfg, 2);
    CHECK(fit.fidelity > 0.97);
    // only the four first-order entries are fitted; the rest keep the seed
    CHECK(fit.bundle0.g20 == doctest::Approx(0.5));
    CHECK(fit.bundle0.k20 == 0.0);
}

TEST_SUITE_END();

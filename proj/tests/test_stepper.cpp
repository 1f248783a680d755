#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "cdjp/gauss.hpp"
#include "cdjp/stepper.hpp"

using namespace cdjp;

TEST_SUITE_BEGIN("stepper");

TEST_CASE("step parameter validation") {
    StepParams p;
    p.dt = 1e-3;
    p.tau = 15.0;
    CHECK_NOTHROW(p.validate());
    p.tau = 0.05;  // dt/tau = 0.02 breaks the weak-measurement regime
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.tau = -1;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("noise stream is a pure function of (seed, stream, step)") {
    const NoiseStream a{42, 7};
    const NoiseStream b{42, 7};
    const NoiseStream c{42, 8};
    for (std::uint64_t k : {0ull, 1ull, 999ull, 123456789ull}) {
        CHECK(a.normal(k) == b.normal(k));
        CHECK(a.normal(k) != c.normal(k));
    }
    // moments sanity
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double g = a.normal(k);
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(a.wiener(3, 1e-3) == doctest::Approx(a.normal(3) * std::sqrt(1e-3)));
}

TEST_CASE("measurement leaves quadrature eigenstates invariant") {
    const OperatorSet ops = build_operators(FockDim(24));
    auto [l, m] = quadratures(ops, 0.55);
    (void)m;
    Eigen::SelfAdjointEigenSolver<Mat> es(l);
    const Vec evec = es.eigenvectors().col(12);  // interior eigenvalue
    const double eval = es.eigenvalues()(12);
    const Mat rho = density_from_ket(evec);

    StepParams p;
    p.dt = 1e-3;
    p.tau = 15.0;
    p.theta = 0.55;
    const Mat stepped = stratonovich_step(rho, eval, p, ops);
    const Mat u = truncated_unitary(hamiltonian(ops, 0, 0), p.dt);
    const Mat unitary_only = u * rho * u.adjoint();
    CHECK((stepped - unitary_only / unitary_only.trace()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tau to infinity reduces to unitary evolution") {
    const OperatorSet ops = build_operators(FockDim(16));
    const Mat rho0 = make_state(ops, {StateKind::Coherent, {}, Complex(0.8, 0.2)});
    StepParams p;
    p.dt = 1e-3;
    p.tau = 1e9;
    p.theta = 0.3;
    Mat rho = rho0;
    const int n_steps = 500;
    for (int k = 0; k < n_steps; ++k) rho = stratonovich_step(rho, 0.1, p, ops);

    const Mat h = hamiltonian(ops, 0, 0);
    const Mat u_exact = (Complex(0, -n_steps * p.dt) * h).exp();
    const Mat rho_exact = u_exact * rho0 * u_exact.adjoint();
    CHECK(std::abs(fidelity_against_ket(rho, ket_from_density(rho_exact)) - 1.0) < 1e-8);
}

TEST_CASE("long-run conservation under constant readout") {
    const OperatorSet ops = build_operators(FockDim(24));
    Vec c = Vec::Zero(5);
    c(0) = 1 / std::sqrt(2.0);
    c(4) = -1 / std::sqrt(2.0);
    Mat rho = density_from_ket(fock_superposition_ket(ops, c));
    StepParams p;
    p.dt = 1e-3;
    p.tau = 15.0;
    p.theta = 0.0;
    p.lambda1 = 0.2;
    for (int k = 0; k < 3000; ++k) {
        rho = stratonovich_step(rho, 0.3, p, ops);
        if (k % 500 == 0) {
            CHECK(std::abs(rho.trace().real() - 1.0) < 1e-12);
            CHECK(hermiticity_residual(rho) < 1e-12);
        }
    }
    CHECK(std::abs(rho.trace().real() - 1.0) < 1e-9);
    CHECK(min_eigenvalue_hermitian(rho) > -1e-9);
}

TEST_CASE("ito step with zero noise on the vacuum") {
    const OperatorSet ops = build_operators(FockDim(16));
    Mat vac = Mat::Zero(16, 16);
    vac(0, 0) = 1;
    StepParams p;
    p.dt = 1e-3;
    p.tau = 15.0;
    p.theta = 0.0;
    auto [rho, r] = ito_step(vac, 0.0, p, ops);
    CHECK(r == doctest::Approx(0.0).epsilon(1e-14));  // <X> = 0 on the vacuum
    CHECK(std::abs(rho.trace().real() - 1.0) < 1e-13);
}

TEST_CASE("deterministic trajectory regression under a fixed seed") {
    const OperatorSet ops = build_operators(FockDim(16));
    const Mat rho0 = make_state(ops, {StateKind::Coherent, {}, Complex(0.5, -0.3)});
    ControlSchedule sched;
    sched.dt = 1e-3;
    const int n = 300;
    for (int k = 0; k <= n; ++k) {
        sched.theta.push_back(0.2 * std::sin(2 * M_PI * k / double(n)));
        sched.lambda1.push_back(k < n / 2 ? 0.2 : -0.2);
        sched.r.push_back(0);
    }
    const NoiseStream noise{987654321, 17};
    const TrajectoryRecord r1 =
        simulate_trajectory(rho0, sched, 15.0, n * 1e-3, 1e-3, noise, ops);
    const TrajectoryRecord r2 =
        simulate_trajectory(rho0, sched, 15.0, n * 1e-3, 1e-3, noise, ops);
    REQUIRE(r1.readout.size() == r2.readout.size());
    for (std::size_t k = 0; k < r1.readout.size(); ++k) CHECK(r1.readout[k] == r2.readout[k]);
    CHECK((r1.final_state - r2.final_state).cwiseAbs().maxCoeff() == 0.0);

    // a different stream gives a different trajectory
    const TrajectoryRecord r3 =
        simulate_trajectory(rho0, sched, 15.0, n * 1e-3, 1e-3, NoiseStream{987654321, 18}, ops);
    CHECK((r1.final_state - r3.final_state).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("zero-duration trajectory keeps only the initial sample") {
    const OperatorSet ops = build_operators(FockDim(8));
    Mat vac = Mat::Zero(8, 8);
    vac(0, 0) = 1;
    ControlSchedule sched;
    sched.dt = 1e-3;
    sched.theta = {0.0};
    sched.lambda1 = {0.0};
    sched.r = {0.0};
    const TrajectoryRecord rec = simulate_trajectory(vac, sched, 15.0, 0.0, 1e-3, {1, 1}, ops);
    CHECK(rec.t.size() == 1);
    CHECK(rec.moments.size() == 1);
    CHECK(rec.moments[0].var_x == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("position-measured vacuum approaches the steady variance") {
    const OperatorSet ops = build_operators(FockDim(36));
    Mat vac = Mat::Zero(36, 36);
    vac(0, 0) = 1;
    ControlSchedule sched;
    sched.dt = 1e-3;
    const int n = 3000;
    sched.theta.assign(n + 1, 0.0);
    sched.lambda1.assign(n + 1, 0.0);
    sched.r.assign(n + 1, 0.0);
    const TrajectoryRecord rec =
        simulate_trajectory(vac, sched, 15.0, 3.0, 1e-3, NoiseStream{5, 0}, ops, false);
    const SteadyCovariances q = steady_state_covariances(15.0);
    const Moments m = moments(rec.final_state, ops);
    CHECK(std::abs(m.var_x - q.q3 / 2) / (q.q3 / 2) < 0.05);
}

TEST_CASE("ensemble mean follows the unconditional mean motion") {
    // With L = L_theta and a quadratic potential the unconditional means
    // rotate classically: d<X>/dt = <P>, d<P>/dt = -(1+2l1)<X>.
    const OperatorSet ops = build_operators(FockDim(12));
    const double theta = 0.2, l1 = 0.1, tau = 5.0, dt = 1e-3;
    const int n_steps = 500, n_traj = 400;
    const Vec psi0 = coherent_ket(ops, Complex(0.6, 0.0));

    KetPropagator prop(ops, tau, dt);
    std::vector<double> xs(n_traj);
    for (int i = 0; i < n_traj; ++i) {
        Vec psi = psi0;
        const NoiseStream noise{2024, std::uint64_t(i)};
        for (int k = 0; k < n_steps; ++k)
            prop.ito_step(psi, noise.wiener(k, dt), theta, l1);
        xs[i] = moments_ket(psi, ops).x_mean;
    }
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= n_traj;
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / (n_traj - 1)) / std::sqrt(double(n_traj));

    const double omega = std::sqrt(1 + 2 * l1);
    const double t = n_steps * dt;
    const Moments m0 = moments_ket(psi0, ops);
    const double expected = m0.x_mean * std::cos(omega * t) + m0.p_mean / omega * std::sin(omega * t);
    CHECK(std::abs(mean - expected) < 3 * se + 1e-4);
}

TEST_CASE("deterministic slices differ by the calculus conversion term") {
    // Ito with dW=0 minus Stratonovich with r=<L> equals (dt/8tau)[ΔV,ρ]_+ up
    // to O(dt²); the residual constant must be stable under dt halving.
    const OperatorSet ops = build_operators(FockDim(14));
    const Mat rho = make_state(ops, {StateKind::Cat, {}, Complex(0.7, 0.4)});
    const double theta = 0.4;
    auto [l, mq] = quadratures(ops, theta);
    (void)mq;
    const Mat v = l * l;
    const double ev = expval(rho, v);
    const Mat dv_ac = (v * rho + rho * v) - 2 * ev * rho;

    auto residual = [&](double dt) {
        StepParams p;
        p.dt = dt;
        p.tau = 15.0;
        p.theta = theta;
        const double el = expval(rho, l);
        const Mat strat = stratonovich_step(rho, el, p, ops);
        const auto [ito, r] = ito_step(rho, 0.0, p, ops);
        (void)r;
        const Mat diff = ito - strat - (dt / (8 * p.tau)) * dv_ac;
        return diff.cwiseAbs().maxCoeff();
    };
    const double c1 = residual(1e-3) / (1e-3 * 1e-3);
    const double c2 = residual(5e-4) / (5e-4 * 5e-4);
    CHECK(c2 / c1 > 0.3);
    CHECK(c2 / c1 < 3.0);
    // and the conversion term explains nearly all of the raw difference
    StepParams p;
    p.dt = 1e-3;
    p.tau = 15.0;
    p.theta = theta;
    const double el = expval(rho, l);
    const double raw =
        (ito_step(rho, 0.0, p, ops).first - stratonovich_step(rho, el, p, ops)).cwiseAbs().maxCoeff();
    CHECK(residual(1e-3) < 0.15 * raw);
}

TEST_CASE("kraus order of accuracy against the dense generator") {
    // one Stratonovich step matches an RK4 reference of the same ODE to O(dt²)
    const OperatorSet ops = build_operators(FockDim(16));
    const Mat rho0 = make_state(ops, {StateKind::Coherent, {}, Complex(0.4, 0.6)});
    const double theta = 0.25, l1 = 0.15, tau = 8.0, r = 0.37;
    const Mat h = hamiltonian(ops, l1, 0);
    auto [l, mq] = quadratures(ops, theta);
    (void)mq;

    auto rk4_reference = [&](const Mat& rho, double dt) {
        auto f = [&](const Mat& x) {
            Mat d = Complex(0, -1) * (h * x - x * h);
            const Mat v = l * l;
            const double evv = (x * v).trace().real();
            const double evl = (x * l).trace().real();
            d -= ((v * x + x * v) - 2 * evv * x) / (4 * tau);
            d += r / (2 * tau) * ((l * x + x * l) - 2 * evl * x);
            return d;
        };
        const Mat k1 = f(rho);
        const Mat k2 = f(rho + 0.5 * dt * k1);
        const Mat k3 = f(rho + 0.5 * dt * k2);
        const Mat k4 = f(rho + dt * k3);
        return (rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)).eval();
    };
    auto err = [&](double dt) {
        StepParams p;
        p.dt = dt;
        p.tau = tau;
        p.theta = theta;
        p.lambda1 = l1;
        return (stratonovich_step(rho0, r, p, ops) - rk4_reference(rho0, dt)).cwiseAbs().maxCoeff();
    };
    const double c1 = err(1e-3) / 1e-6;
    const double c2 = err(5e-4) / 2.5e-7;
    CHECK(c2 / c1 > 0.3);
    CHECK(c2 / c1 < 3.0);
}

TEST_CASE("pure-state propagation matches the density-matrix steppers") {
    const OperatorSet ops = build_operators(FockDim(20));
    const Vec psi0 = cat_ket(ops, Complex(0.8, -0.5));
    const double tau = 15.0, dt = 1e-3;
    KetPropagator prop(ops, tau, dt);
    prop.cache_unitaries(0.2);

    SUBCASE("stratonovich") {
        Vec psi = psi0;
        Mat rho = density_from_ket(psi0);
        StepParams p;
        p.dt = dt;
        p.tau = tau;
        for (int k = 0; k < 200; ++k) {
            const double theta = 0.3 * std::sin(0.05 * k);
            const double l1 = (k % 40 < 20) ? 0.2 : -0.2;
            const double r = 0.1 * std::cos(0.02 * k);
            p.theta = theta;
            p.lambda1 = l1;
            rho = stratonovich_step(rho, r, p, ops);
            prop.strat_step(psi, r, theta, l1);
        }
        CHECK((rho - density_from_ket(psi)).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("ito") {
        Vec psi = psi0;
        Mat rho = density_from_ket(psi0);
        StepParams p;
        p.dt = dt;
        p.tau = tau;
        const NoiseStream noise{77, 3};
        for (int k = 0; k < 200; ++k) {
            const double theta = -0.2 + 0.001 * k;
            p.theta = theta;
            p.lambda1 = 0.1;
            const double dw = noise.wiener(k, dt);
            auto [next, r_used] = ito_step(rho, dw, p, ops);
            rho = next;
            const auto st = prop.ito_step(psi, dw, theta, 0.1);
            CHECK(st.r == doctest::Approx(r_used).epsilon(1e-10));
        }
        CHECK((rho - density_from_ket(psi)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("truncated unitary is 4th order") {
    const OperatorSet ops = build_operators(FockDim(16));
    const Mat h = hamiltonian(ops, 0.2, 0);
    const Mat t4 = truncated_unitary(h, 1e-3);
    const Mat exact = (Complex(0, -1e-3) * h).exp();
    // truncation error must sit far below the measurement-term error dt²/4τ
    CHECK((t4 - exact).cwiseAbs().maxCoeff() < 0.01 * 1e-6 / (4 * 15.0));
}

TEST_CASE("trajectory record CSV layout") {
    const OperatorSet ops = build_operators(FockDim(8));
    Mat vac = Mat::Zero(8, 8);
    vac(0, 0) = 1;
    ControlSchedule sched;
    sched.dt = 1e-3;
    sched.theta.assign(3, 0.0);
    sched.lambda1.assign(3, 0.0);
    sched.r.assign(3, 0.0);
    const TrajectoryRecord rec = simulate_trajectory(vac, sched, 15.0, 2e-3, 1e-3, {9, 0}, ops);
    const std::string csv = rec.to_csv();
    CHECK(csv.rfind("t,x_mean,p_mean,var_x,cov_xp,var_p,r\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
}

TEST_SUITE_END();

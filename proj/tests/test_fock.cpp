#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cdjp/fock.hpp"
#include "cdjp/gauss.hpp"

using namespace cdjp;

TEST_SUITE_BEGIN("fock");

TEST_CASE("ladder algebra at dim 2") {
    const OperatorSet ops = build_operators(FockDim(2));
    CHECK(std::abs(ops.x(0, 1) - Complex(1.0 / std::sqrt(2.0), 0)) < 1e-15);
    CHECK(std::abs(ops.x(1, 0) - Complex(1.0 / std::sqrt(2.0), 0)) < 1e-15);
    CHECK(std::abs(ops.x(0, 0)) < 1e-15);
    CHECK(std::abs(ops.x(1, 1)) < 1e-15);
}

TEST_CASE("canonical commutator on the interior block") {
    const OperatorSet ops = build_operators(FockDim(36));
    const Mat comm = ops.x * ops.p - ops.p * ops.x;
    const Mat err = comm - Complex(0, 1) * ops.identity;
    CHECK(err.topLeftCorner(34, 34).cwiseAbs().maxCoeff() < 1e-12);
    // the truncation artifact is confined to the top level
    CHECK(err.cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("vacuum variance is 1/2") {
    const OperatorSet ops = build_operators(FockDim(36));
    Mat vac = Mat::Zero(36, 36);
    vac(0, 0) = 1;
    CHECK(expval(vac, ops.x2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hermiticity of constructed operators") {
    const OperatorSet ops = build_operators(FockDim(20));
    for (const Mat* m : {&ops.x, &ops.p, &ops.x2, &ops.p2, &ops.x3, &ops.xp_sym, &ops.h0})
        CHECK(hermiticity_residual(*m) < 1e-12);
}

TEST_CASE("quadratures at special angles") {
    const OperatorSet ops = build_operators(FockDim(16));
    auto [l0, m0] = quadratures(ops, 0.0);
    CHECK((l0 - ops.x).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((m0 - ops.p).cwiseAbs().maxCoeff() < 1e-15);
    auto [l1, m1] = quadratures(ops, M_PI / 2);
    CHECK((l1 - ops.p).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m1 + ops.x).cwiseAbs().maxCoeff() < 1e-12);

    // [L, M] = i on the interior block
    auto [l2, m2] = quadratures(ops, 0.37);
    const Mat comm = l2 * m2 - m2 * l2 - Complex(0, 1) * ops.identity;
    CHECK(comm.topLeftCorner(14, 14).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("coherent state quadrature expectation at theta=pi/4") {
    const OperatorSet ops = build_operators(FockDim(36));
    const Vec psi = coherent_ket(ops, Complex(1.0, 0.0));
    auto [l, m] = quadratures(ops, M_PI / 4);
    (void)m;
    const double direct = expval_ket(psi, l);
    const double expect = (expval_ket(psi, ops.x) + expval_ket(psi, ops.p)) / std::sqrt(2.0);
    CHECK(direct == doctest::Approx(expect).epsilon(1e-12));
    CHECK(direct == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hamiltonian spectrum and curvature") {
    const OperatorSet ops = build_operators(FockDim(36));
    // the truncated ladder corrupts the very top of the spectrum (the level
    // n-1 diagonal of aa† collapses), so only the lower half is checked
    const Mat h = hamiltonian(ops, 0.0, 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    for (int n = 0; n < 16; ++n)
        CHECK(es.eigenvalues()(n) == doctest::Approx(n + 0.5).epsilon(1e-9));

    const Mat h2 = hamiltonian(ops, 0.2, 0.0);
    CHECK(((h2 - 0.5 * ops.p2) - 0.7 * ops.x2).cwiseAbs().maxCoeff() < 1e-13);
    const Mat h3 = hamiltonian(ops, -0.2, 0.0);
    CHECK(((h3 - 0.5 * ops.p2) - 0.3 * ops.x2).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("binomial error word") {
    const OperatorSet ops = build_operators(FockDim(36));
    Vec c = Vec::Zero(5);
    c(0) = 1.0 / std::sqrt(2.0);
    c(4) = -1.0 / std::sqrt(2.0);
    const Vec psi = fock_superposition_ket(ops, c);
    CHECK(std::abs(psi(0) - Complex(1 / std::sqrt(2.0), 0)) < 1e-14);
    CHECK(std::abs(psi(4) + Complex(1 / std::sqrt(2.0), 0)) < 1e-14);
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cat state normalization and parity") {
    const OperatorSet ops = build_operators(FockDim(36));

    SUBCASE("alpha = 0 degenerates to the vacuum") {
        const Vec psi = cat_ket(ops, Complex(0, 0));
        CHECK(std::abs(psi(0) - Complex(1, 0)) < 1e-12);
    }
    SUBCASE("even cat has vanishing odd moments") {
        const Vec psi = cat_ket(ops, Complex(0.25, -0.75));
        const Moments m = moments_ket(psi, ops);
        CHECK(std::abs(m.x_mean) < 1e-12);
        CHECK(std::abs(m.p_mean) < 1e-12);
    }
    SUBCASE("norm includes the overlap term") {
        const Mat rho = make_state(ops, {StateKind::Cat, {}, Complex(1.2, 0.4)});
        CHECK(std::abs(rho.trace().real() - 1.0) < 1e-12);
        // only even Fock levels occupied
        const Vec psi = cat_ket(ops, Complex(1.2, 0.4));
        for (int n = 1; n < 36; n += 2) CHECK(std::abs(psi(n)) < 1e-14);
    }
}

TEST_CASE("fidelity basics and closed-form cat overlap") {
    const OperatorSet ops = build_operators(FockDim(36));
    Mat vac = Mat::Zero(36, 36);
    vac(0, 0) = 1;
    Mat one = Mat::Zero(36, 36);
    one(1, 1) = 1;
    CHECK(fidelity(vac, vac) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fidelity(vac, one) == doctest::Approx(0.0).epsilon(1e-14));

    // |<0|cat>|^2 = 2e^{-|a|^2} / (1 + e^{-2|a|^2}) for the even cat
    const Complex alpha(0.25, -0.75);
    const Mat cat = make_state(ops, {StateKind::Cat, {}, alpha});
    const double n2 = std::norm(alpha);
    const double expect = 2 * std::exp(-n2) / (1 + std::exp(-2 * n2));
    CHECK(fidelity(cat, vac) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(fidelity(cat, vac) == doctest::Approx(0.8321172681599558).epsilon(1e-12));

    // symmetric under swap for pure states
    CHECK(fidelity(vac, cat) == doctest::Approx(fidelity(cat, vac)).epsilon(1e-12));

    Mat small = Mat::Zero(8, 8);
    small(0, 0) = 1;
    CHECK_THROWS_AS((void)fidelity(vac, small), DimensionMismatch);
    // mixed target rejected
    Mat mixed = 0.5 * vac + 0.5 * one;
    CHECK_THROWS_AS((void)fidelity(vac, mixed), NonPureInput);
}

TEST_CASE("moments of vacuum and coherent states") {
    const OperatorSet ops = build_operators(FockDim(36));
    Mat vac = Mat::Zero(36, 36);
    vac(0, 0) = 1;
    const Moments mv = moments(vac, ops);
    CHECK(mv.x_mean == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(mv.var_x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mv.var_p == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(mv.cov_xp) < 1e-12);

    const Mat coh = make_state(ops, {StateKind::Coherent, {}, Complex(1, 0)});
    const Moments mc = moments(coh, ops);
    CHECK(mc.x_mean == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
    CHECK(std::abs(mc.p_mean) < 1e-10);
    CHECK(mc.var_x == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(mc.var_p == doctest::Approx(0.5).epsilon(1e-9));

    // Cauchy-Schwarz for a generic state
    const Mat cat = make_state(ops, {StateKind::Cat, {}, Complex(1.0, 0.8)});
    const Moments m = moments(cat, ops);
    CHECK(m.var_x * m.var_p >= m.cov_xp * m.cov_xp);
}

TEST_CASE("squeezed vacuum reproduces the steady covariances") {
    const OperatorSet ops = build_operators(FockDim(36));
    const SteadyCovariances q = steady_state_covariances(15.0);
    const Complex xi = squeezing_parameter(q.q3, q.q4, q.q5);
    const Vec psi = squeezed_vacuum_ket(ops, xi);
    const Moments m = moments_ket(psi, ops);
    CHECK(m.var_x == doctest::Approx(q.q3 / 2).epsilon(1e-8));
    CHECK(m.cov_xp == doctest::Approx(q.q4 / 2).epsilon(1e-8));
    CHECK(m.var_p == doctest::Approx(q.q5 / 2).epsilon(1e-8));

    // displacement moves the means without touching the covariances
    const Complex beta(0.7, -0.35);
    const Vec disp = squeezed_vacuum_ket(ops, xi, beta);
    const Moments md = moments_ket(disp, ops);
    CHECK(md.x_mean == doctest::Approx(std::sqrt(2.0) * beta.real()).epsilon(1e-8));
    CHECK(md.p_mean == doctest::Approx(std::sqrt(2.0) * beta.imag()).epsilon(1e-8));
    CHECK(md.var_x == doctest::Approx(m.var_x).epsilon(1e-7));
}

TEST_CASE("truncation leak is detected") {
    const OperatorSet ops = build_operators(FockDim(8));
    CHECK_THROWS_AS((void)coherent_ket(ops, Complex(2.5, 0)), TruncationLeak);
}

TEST_CASE("ket extraction from a pure density matrix") {
    const OperatorSet ops = build_operators(FockDim(24));
    const Vec psi = cat_ket(ops, Complex(0.9, 0.3));
    const Vec back = ket_from_density(density_from_ket(psi));
    CHECK(std::abs(std::abs(back.dot(psi)) - 1.0) < 1e-10);
    Mat mixed = Mat::Zero(24, 24);
    mixed(0, 0) = 0.6;
    mixed(1, 1) = 0.4;
    CHECK_THROWS_AS((void)ket_from_density(mixed), NonPureInput);
}

TEST_SUITE_END();

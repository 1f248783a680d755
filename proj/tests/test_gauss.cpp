#include <doctest.h>

#include <random>

#include "cdjp/gauss.hpp"

using namespace cdjp;

TEST_SUITE_BEGIN("gauss");

TEST_CASE("steady covariances: fixture, asymptotics, purity") {
    SUBCASE("tau = 15 regression fixture") {
        const SteadyCovariances q = steady_state_covariances(15.0);
        CHECK(q.q3 == doctest::Approx(0.9998611785823696).epsilon(1e-14));
        CHECK(q.q4 == doctest::Approx(0.016662039607268753).epsilon(1e-14));
        CHECK(q.q5 == doctest::Approx(1.0004165028010132).epsilon(1e-14));
    }
    SUBCASE("large tau recovers the vacuum") {
        const SteadyCovariances q = steady_state_covariances(1e4);
        CHECK(q.q3 == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(std::abs(q.q4) < 1e-4);
        CHECK(q.q5 == doctest::Approx(1.0).epsilon(1e-7));
    }
    SUBCASE("purity identity across log-spaced tau") {
        for (int k = 0; k < 20; ++k) {
            const double tau = 0.5 * std::pow(2000.0, k / 19.0);  // 0.5 .. 1000
            const SteadyCovariances q = steady_state_covariances(tau);
            CHECK(q.q3 * q.q5 - q.q4 * q.q4 == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS((void)steady_state_covariances(-1.0), ValidationError);
}

TEST_CASE("squeezing parameter") {
    SUBCASE("vacuum has no squeezing") {
        CHECK(std::abs(squeezing_parameter(1.0, 0.0, 1.0)) == 0.0);
    }
    SUBCASE("both sign branches give the same xi") {
        const SteadyCovariances q = steady_state_covariances(7.0);
        const double hd = 0.5 * (q.q5 - q.q3);
        const double s2r = std::sqrt(hd * hd + q.q4 * q.q4);
        const double c2r = 0.5 * (q.q5 + q.q3);
        // plus branch
        const double rp = 0.5 * std::log(s2r + c2r);
        const Complex xi_p = (rp / s2r) * Complex(hd, -q.q4);
        // minus branch: sinh2R < 0 flips both R and the prefactor sign
        const double rm = 0.5 * std::log(-s2r + c2r);
        const Complex xi_m = (rm / -s2r) * Complex(hd, -q.q4);
        CHECK(std::abs(xi_p - xi_m) < 1e-12);
        CHECK(std::abs(squeezing_parameter(q.q3, q.q4, q.q5) - xi_p) < 1e-12);
        // cosh² - sinh² consistency
        CHECK(c2r * c2r - s2r * s2r == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("non-pure input is rejected") {
        CHECK_THROWS_AS((void)squeezing_parameter(1.2, 0.0, 1.2), NonPureInput);
    }
}

TEST_CASE("closed-form path satisfies its boundary conditions") {
    SUBCASE("homogeneous endpoints give the zero path") {
        const GaussOptimalPath p(0, 0, 0, 0, 3.0, 15.0);
        CHECK(p.constants().alpha1 == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(p.constants().alpha2 == doctest::Approx(0.0).epsilon(1e-14));
        for (double t : {0.0, 1.0, 2.5}) {
            const auto [q1, q2] = p.at(t);
            CHECK(std::abs(q1) < 1e-14);
            CHECK(std::abs(q2) < 1e-14);
        }
    }
    SUBCASE("full-period boundary reduces to the rotated difference") {
        // at t_f = 2πk, cos t_f = 1, sin t_f = 0: the boundary system demands
        // alpha1 * S * t_f / 8tau = q1f - q1i and likewise for alpha2
        const double t_f = 4 * M_PI, tau = 15.0;
        const SteadyCovariances q = steady_state_covariances(tau);
        const double ssum = q.q3 * q.q3 + q.q4 * q.q4;
        const GaussOptimalPath p(1.0, 0.0, 1.7, 0.4, t_f, tau);
        CHECK(p.constants().alpha1 ==
              doctest::Approx((1.7 - 1.0) * 8 * tau / (ssum * t_f)).epsilon(1e-10));
        CHECK(p.constants().alpha2 == doctest::Approx(0.4 * 8 * tau / (ssum * t_f)).epsilon(1e-10));
    }
    SUBCASE("a thousand random endpoint pairs") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        std::uniform_real_distribution<double> ut(0.1, 10.0);
        for (int trial = 0; trial < 1000; ++trial) {
            const double q1i = u(rng), q2i = u(rng), q1f = u(rng), q2f = u(rng);
            const double t_f = ut(rng);
            const GaussOptimalPath p(q1i, q2i, q1f, q2f, t_f, 15.0);
            const auto [a1, b1] = p.at(0.0);
            CHECK(std::abs(a1 - q1i) < 1e-10);
            CHECK(std::abs(b1 - q2i) < 1e-10);
            const auto [a2, b2] = p.at(t_f);
            CHECK(std::abs(a2 - q1f) < 1e-10);
            CHECK(std::abs(b2 - q2f) < 1e-10);
        }
    }
}

TEST_SUITE_END();

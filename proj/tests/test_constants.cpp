#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "choqlog/constants.hpp"

using namespace choqlog;
using Catch::Approx;

namespace {
constexpr double zeta3 = 1.2020569031595942854;
}

TEST_CASE("riesz constant closed forms") {
    CHECK(riesz_constant(2) == Approx(1.0 / (2.0 * pi)).epsilon(1e-14));
    CHECK(riesz_constant(3) == Approx(1.0 / (2.0 * pi * pi)).epsilon(1e-14));
    CHECK(riesz_constant(4) == Approx(1.0 / (8.0 * pi * pi)).epsilon(1e-14));
    CHECK_THROWS_AS(riesz_constant(1), std::invalid_argument);
}

TEST_CASE("floor and factorial conventions") {
    // largest integer strictly below q
    CHECK(frac_floor(4.0) == 3);
    CHECK(frac_floor(3.5) == 3);
    CHECK(frac_floor(0.5) == 0);
    CHECK(frac_factorial(4.0) == Approx(24.0));
    CHECK(frac_factorial(3.5) == Approx(3.5 * 2.5 * 1.5 * 0.5));
}

TEST_CASE("alpha star reduces to the zeta(3) closed form at N=2, s=1/2") {
    const AlphaStar a = alpha_star_upper(2, 0.5, 1e-10);
    const double closed = 2.0 * std::cbrt(6.0 * pi * pi * zeta3);
    CHECK(std::abs(a.value - closed) < 1e-8);
    CHECK(a.remainder < 1e-10);
    CHECK(a.remainder >= 0.0);
}

TEST_CASE("alpha star agrees between summation orders") {
    // forward partial sum vs the Kahan-compensated one used by the implementation
    const int N = 3;
    const double s = 0.5, exponent = N / s;
    const AlphaStar a = alpha_star_upper(N, s, 1e-10);
    double fwd = 0.0;
    for (long k = 0; k < a.terms; ++k) {
        double poly = 1.0;
        for (int i = 1; i <= N - 1; ++i) poly *= (k + i);
        fwd += poly * std::pow(N + 2.0 * k, -exponent);
    }
    double nfact = 6.0;
    const double pref = 2.0 * std::pow(sphere_area(N), 2) * std::tgamma(1.0 + exponent) / nfact;
    const double alpha_fwd = N * std::pow(pref * fwd, s / (N - s));
    CHECK(std::abs(alpha_fwd - a.value) < 1e-8);
}

TEST_CASE("alpha star upper estimate is monotone in the truncation cap") {
    // once the cap exceeds the certified index, value+tail can only shrink
    const int N = 2;
    const double s = 0.5;
    double prev = INFINITY;
    for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
        const AlphaStar a = alpha_star_upper(N, s, tol);
        CHECK(a.upper <= prev + 1e-15);
        prev = a.upper;
    }
}

TEST_CASE("constants bundle at the reference parameters") {
    ProblemParams pp;  // N=2, s=0.5, tau=0.25
    const ConstantsReport cr = constants_bundle(pp, 1.0 / 3.0);

    CHECK(cr.K_frak == Approx(9.5 * pi * pi).epsilon(1e-14));
    // norm cap s/(tau - (1-2/N)s) = 0.5/0.25 = 2
    CHECK(cr.norm_cap == Approx(2.0));
    // decay exponent s(2N+3)/(2(N-s)) = 7/6
    CHECK(cr.decay_a == Approx(7.0 / 6.0));
    CHECK(cr.mu_N <= pp.s / pp.N);
    CHECK(cr.mu_N > 0.0);
    // all fields positive
    for (double v : {cr.omega_N, cr.C_N, cr.alpha_star, cr.J_frak, cr.K_frak, cr.T_N,
                     cr.beta_0, cr.mu_N, cr.norm_cap, cr.decay_a})
        CHECK(v > 0.0);
}

TEST_CASE("mu window: literal product form is vacuous in the plane") {
    ProblemParams pp;
    const double lit = mu_window(pp, MuForm::literal);
    const double dif = mu_window(pp, MuForm::difference);
    // (1-2/N)s = 0 for N=2, so the literal product collapses the window
    CHECK(lit == Approx(0.0).margin(1e-18));
    CHECK(dif == Approx(0.25 / 96.0).epsilon(1e-12));
}

TEST_CASE("decay exponent dominates the natural rate on a parameter sweep") {
    for (int N : {2, 3, 4, 5}) {
        for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double a = s * (2.0 * N + 3.0) / (2.0 * (N - s));
            CHECK(a > N * s / (N - s));
        }
    }
}

TEST_CASE("K_frak diverges toward s = N/(N-1) through the 1/(N/s-N+1) factor") {
    // the limit point sits beyond s = 1; probe the formula along a grid approaching it
    const int N = 2;
    double prev = 0.0;
    for (double s : {0.5, 0.9, 1.5, 1.9, 1.99, 1.999}) {
        const double k = K_frak(N, s);
        CHECK(k > prev);
        prev = k;
    }
    CHECK(prev > 100.0 * K_frak(N, 0.5));
    CHECK_THROWS_AS(K_frak(2, 2.0), std::domain_error);
}

TEST_CASE("T threshold and beta0 at the reference parameters") {
    ProblemParams pp;
    const double J = J_frak(2, 0.5, 1.0 / 3.0, 1.0);
    const double K = K_frak(2, 0.5);
    const double T = T_threshold(2, 0.5, 1.0 / 3.0, 1.0);
    CHECK(T == Approx(std::pow(std::pow(2.0, 0.25) * (J + K), -0.25)).epsilon(1e-14));
    const double b0 = beta_zero(2, 0.5, 1.0);
    const double expect = std::pow(2.0, 6.0) * 9.0 /
                          (pi * pi * riesz_constant(2) * std::log(3.0)) *
                          std::pow(J + K, 1.25);
    CHECK(b0 == Approx(expect).epsilon(1e-13));
}

TEST_CASE("parameter validation") {
    ProblemParams pp;
    pp.tau = 0.6;  // above s
    CHECK_THROWS_AS(pp.validate(), std::invalid_argument);
    pp.tau = 0.25;
    pp.s = 1.5;
    CHECK_THROWS_AS(pp.validate(), std::invalid_argument);
    pp.s = 0.5;
    pp.N = 1;
    CHECK_THROWS_AS(pp.validate(), std::invalid_argument);
}

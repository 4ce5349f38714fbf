#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "choqlog/constants.hpp"
#include "choqlog/mc_oracle.hpp"
#include "choqlog/radial_core.hpp"
#include "test_helpers.hpp"

using namespace choqlog;
using Catch::Approx;
using choqlog_test::small_grid;

TEST_CASE("grid construction and invariants") {
    GridPtr g = RadialGrid::make(48, 8.0, 1.15);
    CHECK(g->node(0) == 0.0);
    CHECK(g->r_max() == 8.0);
    // uniform on [0,1]
    for (std::size_t i = 1; i <= 48; ++i)
        CHECK(g->node(i) == Approx(i / 48.0).margin(1e-15));
    // geometric ratio bounded beyond 1
    for (std::size_t i = 49; i + 1 < g->size(); ++i) {
        const double h0 = g->node(i) - g->node(i - 1);
        const double h1 = g->node(i + 1) - g->node(i);
        CHECK(h1 / h0 < 1.21);
    }
    CHECK_THROWS_AS(RadialGrid::make(48, 8.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(RadialGrid::make(48, 0.5, 1.1), std::invalid_argument);
}

TEST_CASE("field interpolation and zero extension") {
    RadialField u(small_grid());
    for (std::size_t i = 0; i < u.values.size(); ++i)
        u.values[i] = 1.0 + small_grid()->node(i);
    u.values.back() = 0.0;
    CHECK(u(0.0) == Approx(1.0));
    CHECK(u(100.0) == 0.0);  // beyond r_max
    const double r = 0.5 * (small_grid()->node(3) + small_grid()->node(4));
    CHECK(u(r) == Approx(0.5 * (u.values[3] + u.values[4])));
}

TEST_CASE("plateau test function shape") {
    const double R = 1.0 / 3.0;
    RadialField w = plateau_test_function(R, small_grid());
    CHECK(w(0.0) == 1.0);
    CHECK(w(R) == Approx(0.0).margin(1e-15));
    CHECK(w(0.75 * R) == Approx(0.5).margin(1e-12));
    CHECK(w(2.0 * R) == 0.0);
    // grid misalignment rejected
    CHECK_THROWS_AS(plateau_test_function(0.3001, small_grid()), std::invalid_argument);
}

TEST_CASE("lp_norm basics") {
    auto V1 = constant_potential(1.0);
    RadialField z(small_grid());
    CHECK(lp_norm(z, 4.0, V1, 2) == 0.0);

    // V-term of the plateau at R=1/3: exact value pi/36 + 7 pi/540 = 11 pi/270
    RadialField w = plateau_test_function(1.0 / 3.0, small_grid());
    const double vterm = std::pow(lp_norm(w, 4.0, V1, 2), 4.0);
    CHECK(vterm == Approx(11.0 * pi / 270.0).epsilon(1e-10));

    // homogeneity at 1e-12
    RadialField w3 = 3.0 * w;
    CHECK(lp_norm(w3, 4.0, V1, 2) == Approx(3.0 * lp_norm(w, 4.0, V1, 2)).epsilon(1e-12));
}

TEST_CASE("moser-trudinger functional") {
    // Phi at the scalar level: N=2, s=1/2 has j* = 4, Phi(1) = e - 2.5
    CHECK(phi_mt(1.0, 4) == Approx(std::exp(1.0) - 2.5).epsilon(1e-13));
    CHECK(phi_mt(0.0, 4) == 0.0);
    // monotone increasing and convex on a sample grid (all Taylor terms positive)
    double prev = 0.0, prev_d = 0.0;
    for (double t : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double v = phi_mt(t, 4);
        CHECK(v > prev);
        const double d = (phi_mt(t + 1e-4, 4) - phi_mt(t - 1e-4, 4)) / 2e-4;
        CHECK(d > prev_d);
        prev = v;
        prev_d = d;
    }

    RadialField z(small_grid());
    CHECK(mt_functional(z, 1.0, 2, 0.5) == 0.0);
    RadialField w = plateau_test_function(1.0 / 3.0, small_grid());
    CHECK(mt_functional(w, 1.0, 2, 0.5) > 0.0);
    // overflow guard past exponent 700
    RadialField big = 300.0 * w;
    CHECK_THROWS_AS(mt_functional(big, 1.0, 2, 0.5), std::overflow_error);
}

TEST_CASE("gagliardo seminorm: trivial and scaling properties") {
    GridPtr g = small_grid();
    RadialField c(g, 2.5);  // globally constant profile
    CHECK(gagliardo_seminorm(c, 0.5, 2) == 0.0);

    RadialField w = plateau_test_function(1.0 / 3.0, g);
    const double sp = gagliardo_seminorm(w, 0.5, 2);
    CHECK(sp > 0.0);
    // |lambda|^{N/s} homogeneity to 1e-10 relative
    RadialField w2 = 1.7 * w;
    CHECK(gagliardo_seminorm(w2, 0.5, 2) ==
          Approx(std::pow(1.7, 4.0) * sp).epsilon(1e-10));

    // a field that does not vanish at r_max has no finite zero-extension seminorm
    RadialField bad(g, 1.0);
    bad.values.back() = 0.5;
    CHECK_THROWS_AS(gagliardo_seminorm(bad, 0.5, 2), std::domain_error);
}

TEST_CASE("plateau seminorm stays below the printed bound") {
    // frozen reference 20.7315 comes from an independent adaptive double quadrature
    RadialField w = plateau_test_function(1.0 / 3.0, small_grid());
    const double sp = gagliardo_seminorm(w, 0.5, 2);
    CHECK(sp == Approx(20.7315).epsilon(2e-3));
    CHECK(sp < K_frak(2, 0.5));

    const double vterm = 11.0 * pi / 270.0;
    const double bound = J_frak(2, 0.5, 1.0 / 3.0, 1.0) + K_frak(2, 0.5);
    CHECK(sp + vterm < 0.99 * bound);
}

TEST_CASE("seminorm agrees with the ambient Monte-Carlo oracle") {
    GridPtr g = small_grid();
    RadialField w = plateau_test_function(1.0 / 3.0, g);
    const double quad = gagliardo_seminorm(w, 0.5, 2);
    const McSeminorm mc = mc_ambient_seminorm_2d(planar_field(w, 0.0, 0.0), 0.0, 0.0, 1.0,
                                                 4.0, 4'000'000, 20240901ULL);
    INFO("quad " << quad << " mc " << mc.value << " +- " << mc.std_error);
    CHECK(std::abs(quad / mc.value - 1.0) < 0.02);
}

TEST_CASE("ambient oracle sees the translated (non-radial) copy identically") {
    GridPtr g = small_grid();
    RadialField w = plateau_test_function(1.0 / 3.0, g);
    const double quad = gagliardo_seminorm(w, 0.5, 2);
    const McSeminorm shifted = mc_ambient_seminorm_2d(planar_field(w, 0.7, -0.3), 0.7, -0.3,
                                                      1.0, 4.0, 4'000'000, 8ULL);
    CHECK(std::abs(shifted.value / quad - 1.0) < 0.02);
}

TEST_CASE("seminorm refinement convergence") {
    // halving all unit segments: value settles at first order or better
    RadialField w48 = plateau_test_function(1.0 / 3.0, RadialGrid::make(48, 8.0, 1.15));
    RadialField w96 = plateau_test_function(1.0 / 3.0, RadialGrid::make(96, 8.0, 1.07));
    RadialField w192 = plateau_test_function(1.0 / 3.0, RadialGrid::make(192, 8.0, 1.035));
    const double a = gagliardo_seminorm(w48, 0.5, 2);
    const double b = gagliardo_seminorm(w96, 0.5, 2);
    const double c = gagliardo_seminorm(w192, 0.5, 2);
    CHECK(std::abs(b - c) <= 0.6 * std::abs(a - b) + 1e-9);
}

TEST_CASE("field CSV round trip is bit exact") {
    GridPtr g = small_grid();
    RadialField u(g);
    SplitMix64 rng(99);
    for (double& v : u.values) v = rng.normal() * 1e-3;
    const std::string path =
        (std::filesystem::temp_directory_path() / "choqlog_field.csv").string();
    write_field_csv(u, path);
    RadialField back = read_field_csv(path);
    REQUIRE(back.values.size() == u.values.size());
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        CHECK(back.values[i] == u.values[i]);
        CHECK(back.grid->node(i) == g->node(i));
    }
    std::remove(path.c_str());
}

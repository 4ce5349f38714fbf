#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "choqlog/config.hpp"
#include "choqlog/report.hpp"

using namespace choqlog;

TEST_CASE("minimal config gets defaults and validates") {
    std::istringstream in("[problem]\nN = 2\ns = 0.5\ntau = 0.25\n");
    const RunConfig c = parse_config_stream(in);
    CHECK(c.problem.N == 2);
    CHECK(c.unit_segments == 240);
    CHECK(c.mu_count == 7);
    CHECK(c.mu_form == MuForm::difference);
    CHECK(c.seed == 12345);
}

TEST_CASE("validation names the violated window") {
    std::istringstream in("[problem]\nN = 2\ns = 0.5\ntau = 0.6\n");
    try {
        parse_config_stream(in);
        FAIL("expected a validation error");
    } catch (const ConfigError& ex) {
        const std::string msg = ex.what();
        CHECK(msg.find("tau") != std::string::npos);
        CHECK(msg.find("validation-error") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected with line info") {
    std::istringstream in("[problem]\nN = 2\nfoo = 1\n");
    try {
        parse_config_stream(in);
        FAIL("expected a parse error");
    } catch (const ConfigError& ex) {
        const std::string msg = ex.what();
        CHECK(msg.find("unknown key") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
}

TEST_CASE("syntax errors carry line numbers") {
    std::istringstream in("[problem]\nN 2\n");
    try {
        parse_config_stream(in);
        FAIL("expected a parse error");
    } catch (const ConfigError& ex) {
        CHECK(std::string(ex.what()).find("line 2") != std::string::npos);
    }
    std::istringstream dup("[problem]\nN = 2\nN = 3\n");
    CHECK_THROWS_AS(parse_config_stream(dup), ConfigError);
}

TEST_CASE("echo round trip preserves every field") {
    std::istringstream in(
        "[problem]\nN = 2\ns = 0.5\ntau = 0.3\nV_upper = 2.0\n"
        "[nonlinearity]\nq = 5\nalpha = 0.5\n"
        "[grid]\nunit_segments = 48\nr_max = 10.0\n"
        "[mu]\ncount = 3\n"
        "[solver]\ntol_residual = 5e-4\n"
        "[run]\nseed = 99\nmu_form = literal\nout_dir = /tmp/choqlog_echo_test\n");
    const RunConfig a = parse_config_stream(in);
    std::istringstream echoed(echo_config(a));
    const RunConfig b = parse_config_stream(echoed);
    CHECK(b.problem.tau == a.problem.tau);
    CHECK(b.problem.V_upper == a.problem.V_upper);
    CHECK(b.nl_q == a.nl_q);
    CHECK(b.nl_alpha == a.nl_alpha);
    CHECK(b.unit_segments == a.unit_segments);
    CHECK(b.r_max == a.r_max);
    CHECK(b.mu_count == a.mu_count);
    CHECK(b.tol_residual == a.tol_residual);
    CHECK(b.seed == a.seed);
    CHECK(b.mu_form == MuForm::literal);
    CHECK(b.out_dir == a.out_dir);
    CHECK(echo_config(a) == echo_config(b));
}

TEST_CASE("mu schedule generation") {
    RunConfig c;
    c.mu_max = 1.0;
    c.mu_factor = 0.5;
    c.mu_count = 4;
    const auto s = c.mu_schedule();
    REQUIRE(s.size() == 4);
    CHECK(s[0] == 1.0);
    CHECK(s[3] == 0.125);
}

TEST_CASE("grid segment alignment requirement") {
    RunConfig c;
    c.unit_segments = 250;  // not a multiple of 24
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("report anchors come from the closed vocabulary") {
    VerificationReport rep;
    CheckEntry ok{"x", "riesz-kernel-prefactor", 1.0, 1.0, 0.0, true, true, ""};
    rep.add(ok);
    CheckEntry bad{"y", "made-up-anchor", 1.0, 1.0, 0.0, true, true, ""};
    CHECK_THROWS_AS(rep.add(bad), std::logic_error);
}

TEST_CASE("report json round trip is lossless") {
    VerificationReport rep;
    rep.add(CheckEntry{"a", "riesz-kernel-prefactor", 0.15915494309189535, 1e-12,
                       3.4e-17, true, true, "N=2"});
    rep.add(CheckEntry{"b", "mp-level-cap", 0.0123456789012345678, 0.125, 0.11,
                       false, false, "witness"});
    const auto j1 = rep.to_json();
    const VerificationReport back = VerificationReport::from_json(j1);
    const auto j2 = back.to_json();
    CHECK(j1.dump() == j2.dump());
    CHECK(back.entries()[1].measured == rep.entries()[1].measured);
    // gating semantics: the failing entry is non-gating, so the report passes
    CHECK(rep.all_pass());
    CHECK(rep.fail_count() == 0);
}

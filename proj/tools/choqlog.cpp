#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "choqlog/config.hpp"
#include "choqlog/constants.hpp"
#include "choqlog/energy.hpp"
#include "choqlog/mountain_pass.hpp"
#include "choqlog/nonlinearity.hpp"
#include "choqlog/pipeline.hpp"
#include "choqlog/poisson_post.hpp"
#include "choqlog/radial_core.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json constants_json(const choqlog::ConstantsReport& cr) {
    ordered_json j;
    j["omega_N"] = cr.omega_N;
    j["C_N"] = cr.C_N;
    j["alpha_star"] = cr.alpha_star;
    j["alpha_star_remainder"] = cr.alpha_star_remainder;
    j["J_frak"] = cr.J_frak;
    j["K_frak"] = cr.K_frak;
    j["T_N"] = cr.T_N;
    j["beta_0"] = cr.beta_0;
    j["mu_N"] = cr.mu_N;
    j["norm_cap"] = cr.norm_cap;
    j["decay_a"] = cr.decay_a;
    j["mu_form"] = choqlog::to_string(cr.mu_form);
    j["provenance"] = ordered_json{
        {"C_N", "riesz-kernel-prefactor"},
        {"alpha_star", "mt-exponent-series"},
        {"J_frak", "plateau-norm-bound"},
        {"K_frak", "plateau-norm-bound"},
        {"T_N", "assumption-f5-beta"},
        {"beta_0", "assumption-f5-beta"},
        {"mu_N", "growth-window-positivity"},
        {"norm_cap", "uniform-norm-cap"},
        {"decay_a", "limit-decay-fit"},
    };
    return j;
}

ordered_json assumption_json(const choqlog::AssumptionReport& ar) {
    ordered_json checks = ordered_json::array();
    for (const auto& c : ar.checks) {
        ordered_json j;
        j["name"] = c.name;
        j["pass"] = c.pass;
        j["margin"] = c.margin;
        j["witness_t"] = c.witness_t;
        checks.push_back(std::move(j));
    }
    ordered_json j;
    j["checks"] = std::move(checks);
    j["ratio_inf"] = ar.ratio_inf;
    j["ratio_sup"] = ar.ratio_sup;
    j["beta_measured"] = ar.beta_measured;
    j["W_inf"] = ar.W_inf;
    j["b1"] = ar.b1;
    j["b2"] = ar.b2;
    j["M0"] = ar.M0;
    j["s0"] = ar.s0;
    j["all_pass"] = ar.all_pass();
    return j;
}

void write_run_dir_common(const choqlog::RunConfig& cfg, double lambda) {
    fs::create_directories(cfg.out_dir + "/fields");
    choqlog::RunConfig echoed = cfg;
    echoed.nl_lambda = lambda;
    std::ofstream os(cfg.out_dir + "/config.echo");
    os << choqlog::echo_config(echoed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical mountain-pass pipeline for log-kernel Choquard problems"};
    app.require_subcommand(1);

    // constants
    auto* sc_constants = app.add_subcommand("constants", "Evaluate the explicit constants");
    int cN = 2;
    double cs = 0.5, ctau = 0.25, cR = 1.0 / 3.0, ctol = 1e-10, cVu = 1.0;
    std::string cform = "difference";
    sc_constants->add_option("--N", cN, "dimension (>= 2)");
    sc_constants->add_option("--s", cs, "fractional order in (0,1)");
    sc_constants->add_option("--tau", ctau, "growth exponent in ((1-2/N)s, s)");
    sc_constants->add_option("--R", cR, "plateau radius in (0,1]");
    sc_constants->add_option("--mu-form", cform, "literal|difference");
    sc_constants->add_option("--tol", ctol, "series tolerance");
    sc_constants->add_option("--V-upper", cVu, "potential upper bound");

    // check-f
    auto* sc_checkf = app.add_subcommand("check-f", "Audit the nonlinearity assumptions");
    std::string f_config;
    sc_checkf->add_option("--config", f_config, "config file")->required();

    // seminorm
    auto* sc_semi = app.add_subcommand("seminorm", "Norms of a field or the plateau");
    std::string s_config, s_field;
    double s_R = 1.0 / 3.0;
    sc_semi->add_option("--config", s_config, "config file")->required();
    sc_semi->add_option("--field", s_field, "CSV field (default: plateau)");
    sc_semi->add_option("--R", s_R, "plateau radius when no field is given");

    // solve
    auto* sc_solve = app.add_subcommand("solve", "Single saddle solve at a fixed mu");
    std::string so_config;
    double so_mu = 1.0;
    sc_solve->add_option("--config", so_config, "config file")->required();
    sc_solve->add_option("--mu", so_mu, "kernel parameter in (0,1]")->required();

    // continue
    auto* sc_cont = app.add_subcommand("continue", "Continuation along the mu schedule");
    std::string co_config;
    sc_cont->add_option("--config", co_config, "config file")->required();

    // poisson
    auto* sc_poisson = app.add_subcommand("poisson", "Potential reconstruction for a run");
    std::string p_run;
    sc_poisson->add_option("--run", p_run, "run directory")->required();

    // verify-all
    auto* sc_verify = app.add_subcommand("verify-all", "Run every enabled audit");
    std::string v_config;
    sc_verify->add_option("--config", v_config, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_constants->parsed()) {
            choqlog::ProblemParams pp;
            pp.N = cN;
            pp.s = cs;
            pp.tau = ctau;
            pp.V_upper = cVu;
            const auto cr = choqlog::constants_bundle(pp, cR,
                                                      choqlog::mu_form_from_string(cform),
                                                      ctol);
            std::cout << constants_json(cr).dump(2) << "\n";
            return 0;
        }
        if (sc_checkf->parsed()) {
            const auto cfg = choqlog::parse_config(f_config);
            const auto art = choqlog::prepare_pipeline(cfg);
            const auto grid_t = choqlog::default_audit_grid(art.nl);
            const auto ar = choqlog::verify_assumptions(art.nl, cfg.problem, grid_t,
                                                        cfg.f4_threshold);
            std::cout << assumption_json(ar).dump(2) << "\n";
            return ar.all_pass() || !cfg.strict_f3_upper ? 0 : 1;
        }
        if (sc_semi->parsed()) {
            const auto cfg = choqlog::parse_config(s_config);
            auto art = choqlog::prepare_pipeline(cfg);
            choqlog::RadialField u =
                s_field.empty() ? choqlog::plateau_test_function(s_R, art.grid)
                                : choqlog::read_field_csv(s_field, cfg.quad_order);
            ordered_json j;
            j["seminorm_pow"] = choqlog::gagliardo_seminorm(u, cfg.problem.s, cfg.problem.N);
            j["v_term"] = art.model->vterm_pow(u.values);
            j["vnorm_pow"] = art.model->vnorm_pow(u.values);
            j["bound_J_plus_K"] = art.constants.J_frak + art.constants.K_frak;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (sc_solve->parsed()) {
            const auto cfg = choqlog::parse_config(so_config);
            auto art = choqlog::prepare_pipeline(cfg);
            write_run_dir_common(cfg, art.nl.lambda());
            choqlog::SaddleOptions opts;
            opts.path_points = cfg.path_points;
            opts.tol_residual = cfg.tol_residual;
            opts.tol_level = cfg.tol_level;
            opts.max_iterations = cfg.max_iterations;
            opts.polish = cfg.polish;
            opts.seed = cfg.seed;
            const auto e = choqlog::find_endpoint(*art.model, so_mu);
            const auto r = choqlog::saddle_search(*art.model, so_mu, e, opts);
            const auto audit = choqlog::level_and_norm_audit(*art.model, r);
            choqlog::write_field_csv(r.u_mu, cfg.out_dir + "/fields/u_mu.csv");
            ordered_json j;
            j["mu"] = r.mu;
            j["c_mu"] = r.c_mu;
            j["residual"] = r.residual;
            j["iterations"] = r.iterations;
            j["norm_pow"] = audit.norm_pow;
            j["level_ok"] = audit.level_ok;
            j["norm_ok"] = audit.norm_ok;
            std::ofstream os(cfg.out_dir + "/saddle.json");
            os << j.dump(2) << "\n";
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (sc_cont->parsed()) {
            auto cfg = choqlog::parse_config(co_config);
            cfg.verify_mc_oracle = false;
            const auto art = choqlog::run_verify_all(cfg, true);
            std::cout << art.report.to_json().dump(2) << "\n";
            return art.report.all_pass() ? 0 : 1;
        }
        if (sc_poisson->parsed()) {
            const auto cfg = choqlog::parse_config(p_run + "/config.echo");
            const auto nl = choqlog::Nonlinearity(cfg.problem.N, cfg.problem.s,
                                                  cfg.nl_lambda, cfg.nl_alpha, cfg.nl_q);
            const auto u0 = choqlog::read_field_csv(p_run + "/fields/u0.csv",
                                                    cfg.quad_order);
            const auto pr = choqlog::poisson_potential(u0, nl, cfg.problem.N);
            choqlog::write_field_csv(pr.phi, p_run + "/fields/phi.csv");
            ordered_json j;
            j["F_mass"] = pr.F_mass;
            j["asymptotic_deviation"] = pr.asymptotic_deviation;
            j["logF_integral"] = pr.logF_integral;
            ordered_json lg;
            for (const auto& [g, v] : pr.lgamma_norms) lg[std::to_string(g)] = v;
            j["lgamma_norms"] = std::move(lg);
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (sc_verify->parsed()) {
            const auto cfg = choqlog::parse_config(v_config);
            const auto art = choqlog::run_verify_all(cfg, true);
            std::cout << art.report.to_json().dump(2) << "\n";
            return art.report.all_pass() ? 0 : 1;
        }
    } catch (const choqlog::ConfigError& ex) {
        std::cerr << "configuration error: " << ex.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "configuration error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}

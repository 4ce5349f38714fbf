#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "choqlog/config.hpp"
#include "choqlog/constants.hpp"
#include "choqlog/energy.hpp"
#include "choqlog/grid.hpp"
#include "choqlog/kernels.hpp"
#include "choqlog/mc_oracle.hpp"
#include "choqlog/mountain_pass.hpp"
#include "choqlog/nonlinearity.hpp"
#include "choqlog/poisson_post.hpp"
#include "choqlog/report.hpp"

namespace choqlog {

struct PipelineArtifacts {
    RunConfig config;
    GridPtr grid;
    Nonlinearity nl;
    std::shared_ptr<EnergyModel> model;
    ConstantsReport constants;
    std::optional<RimEstimate> rim;
    std::optional<ContinuationResult> cont;
    std::optional<PotentialReport> potential;
    VerificationReport report;
};

namespace detail {

inline double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i]; sy += ys[i]; sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline RadialField bump_field(const GridPtr& grid, double radius, double amp) {
    RadialField f(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double r = grid->node(i);
        const double z = r / radius;
        f.values[i] = r < radius ? amp * (1.0 - z * z) : 0.0;
    }
    f.values.back() = 0.0;
    return f;
}

inline RadialField hat_field(const GridPtr& grid, double radius, double amp) {
    RadialField f(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double r = grid->node(i);
        f.values[i] = r < radius ? amp * (1.0 - r / radius) : 0.0;
    }
    f.values.back() = 0.0;
    return f;
}

}  // namespace detail

inline Potential model_potential(const ProblemParams& pp) {
    return constant_potential(0.5 * (pp.V_lower + pp.V_upper));
}

/// Builds grid, calibrated nonlinearity and energy model from a validated config.
inline PipelineArtifacts prepare_pipeline(const RunConfig& cfg) {
    PipelineArtifacts art;
    art.config = cfg;
    art.grid = RadialGrid::make(cfg.unit_segments, cfg.r_max, cfg.ratio, cfg.quad_order);
    art.constants = constants_bundle(cfg.problem, 1.0 / 3.0, cfg.mu_form);
    double lambda = cfg.nl_lambda;
    if (lambda == 0.0) {
        const Nonlinearity proto(cfg.problem.N, cfg.problem.s, 1.0, cfg.nl_alpha, cfg.nl_q);
        lambda = calibrate_amplitude(proto, cfg.problem,
                                     cfg.target_beta_factor * art.constants.beta_0);
    }
    art.nl = Nonlinearity(cfg.problem.N, cfg.problem.s, lambda, cfg.nl_alpha, cfg.nl_q);
    art.model = std::make_shared<EnergyModel>(art.grid, cfg.problem,
                                              model_potential(cfg.problem), art.nl);
    return art;
}

/// Runs every enabled audit; writes the run directory when requested. Exit-code
/// semantics live in the CLI (0 all-pass / 1 any-fail / 2 config error).
inline PipelineArtifacts run_verify_all(const RunConfig& cfg, bool write_outputs = true) {
    PipelineArtifacts art = prepare_pipeline(cfg);
    VerificationReport& rep = art.report;
    const ProblemParams& pp = cfg.problem;
    const ConstantsReport& cr = art.constants;

    auto add = [&](const std::string& id, const std::string& anchor, double measured,
                   double bound, double margin, bool pass, const std::string& witness,
                   bool gating = true) {
        rep.add(CheckEntry{id, anchor, measured, bound, margin, pass, gating, witness});
    };

    // --- constants ---
    {
        const double c2 = riesz_constant(2), want2 = 1.0 / (2.0 * pi);
        add("riesz-C2", "riesz-kernel-prefactor", c2, want2, std::abs(c2 - want2),
            std::abs(c2 - want2) < 1e-12, "N=2");
        const double c3 = riesz_constant(3), want3 = 1.0 / (2.0 * pi * pi);
        add("riesz-C3", "riesz-kernel-prefactor", c3, want3, std::abs(c3 - want3),
            std::abs(c3 - want3) < 1e-12, "N=3");
        const double c4 = riesz_constant(4), want4 = 1.0 / (8.0 * pi * pi);
        add("riesz-C4", "riesz-kernel-prefactor", c4, want4, std::abs(c4 - want4),
            std::abs(c4 - want4) < 1e-12, "N=4");
    }
    {
        const AlphaStar a = alpha_star_upper(2, 0.5, 1e-10);
        const double zeta3 = 1.2020569031595942854;
        const double closed = 2.0 * std::cbrt(6.0 * pi * pi * zeta3);
        add("alpha-star-closed", "mt-exponent-closed-form", a.value, closed,
            std::abs(a.value - closed), std::abs(a.value - closed) < 1e-8, "N=2 s=0.5");
        add("alpha-star-remainder", "mt-exponent-series", a.remainder, 1e-10,
            1e-10 - a.remainder, a.remainder < 1e-10, "certified tail");
    }
    {
        const double k2 = K_frak(2, 0.5), want = 9.5 * pi * pi;
        add("k-frak-2-05", "constants-bundle-identities", k2, want, std::abs(k2 - want),
            std::abs(k2 - want) < 1e-12, "literal evaluation");
        add("mu-window", "growth-window-positivity", cr.mu_N, pp.s / pp.N,
            pp.s / pp.N - cr.mu_N, cr.mu_N > 0.0 && cr.mu_N <= pp.s / pp.N,
            to_string(cfg.mu_form));
        const double nat = pp.N * pp.s / (pp.N - pp.s);
        add("decay-a-dominates", "decay-exponent-dominance", cr.decay_a, nat,
            cr.decay_a - nat, cr.decay_a > nat, "");
    }

    // --- kernel family ---
    {
        std::vector<double> tg(10000);
        for (std::size_t i = 0; i < tg.size(); ++i)
            tg[i] = static_cast<double>(i + 1) / tg.size();
        const KernelIneqReport k1 = check_kernel_inequalities(1.0, 1.5, tg);
        add("kernel-lower-mu1", "kernel-log-lower-bound", k1.lower_min_margin, 0.0,
            k1.lower_min_margin, k1.lower_ok, "mu=1, 1e4 nodes");
        const KernelIneqReport k05 = check_kernel_inequalities(0.5, 0.6, tg);
        add("kernel-lower-mu05", "kernel-log-lower-bound", k05.lower_min_margin, 0.0,
            k05.lower_min_margin, k05.lower_ok, "mu=0.5");

        // C_nu refinement stability
        std::vector<double> tg2(20000);
        for (std::size_t i = 0; i < tg2.size(); ++i)
            tg2[i] = 20.0 * static_cast<double>(i + 1) / tg2.size();
        std::vector<double> tg3(40000);
        for (std::size_t i = 0; i < tg3.size(); ++i)
            tg3[i] = 20.0 * static_cast<double>(i + 1) / tg3.size();
        const double c1 = check_kernel_inequalities(0.5, 0.6, tg2).C_nu;
        const double c2 = check_kernel_inequalities(0.5, 0.6, tg3).C_nu;
        const double drift = std::abs(c2 / c1 - 1.0);
        add("kernel-cnu-stable", "kernel-power-envelope", drift, 0.01, 0.01 - drift,
            std::isfinite(c1) && drift < 0.01, "mu=0.5 nu=0.6 refinement");
    }
    {
        // sup_{[0.1,10]} |G_mu - log(1/.)| decays with order >= 0.9 along mu = 2^-k
        std::vector<double> xs, ys;
        for (int k = 0; k <= 8; ++k) {
            const double mu = std::pow(0.5, k);
            const KernelSpec gk = KernelSpec::g_mu(mu);
            double sup = 0.0;
            for (int i = 0; i <= 2000; ++i) {
                const double t = 0.1 * std::pow(100.0, i / 2000.0);
                sup = std::max(sup, std::abs(kernel_eval(gk, t) + std::log(t)));
            }
            xs.push_back(std::log(mu));
            ys.push_back(std::log(sup));
        }
        const double order = detail::ls_slope(xs, ys);
        add("kernel-convergence-order", "kernel-uniform-convergence", order, 0.9,
            order - 0.9, order >= 0.9, "mu = 2^-k, k = 0..8");
    }
    {
        std::vector<double> tg(400), tg2(800);
        const double cap = art.nl.t_at_exponent(200.0);
        for (std::size_t i = 0; i < tg.size(); ++i)
            tg[i] = 1e-3 * std::pow(cap / 1e-3, i / (tg.size() - 1.0));
        for (std::size_t i = 0; i < tg2.size(); ++i)
            tg2[i] = 1e-3 * std::pow(cap / 1e-3, i / (tg2.size() - 1.0));
        const auto b1 = phi_power_bound_check(1.0, 2.0, 3.0, tg, pp.N, pp.s);
        const auto b2 = phi_power_bound_check(1.0, 2.0, 3.0, tg2, pp.N, pp.s);
        const double drift = std::abs(b2.C_beta / b1.C_beta - 1.0);
        add("phi-power-bound", "phi-power-bound", b1.C_beta, 0.0, 0.02 - drift,
            b1.finite && b2.finite && drift < 0.02, "alpha=1 r=2 beta=3");
    }

    // --- nonlinearity assumptions ---
    {
        const auto grid_t = default_audit_grid(art.nl);
        const AssumptionReport ar = verify_assumptions(art.nl, pp, grid_t, cfg.f4_threshold);
        for (const auto& c : ar.checks) {
            const bool gating = c.name != "f3-upper" || cfg.strict_f3_upper;
            add("assumption-" + c.name, "assumption-" + c.name, c.margin, 0.0, c.margin,
                c.pass, "t=" + std::to_string(c.witness_t), gating);
        }
        add("beta-calibration", "amplitude-calibration", ar.beta_measured,
            cfg.target_beta_factor * cr.beta_0,
            ar.beta_measured - cr.beta_0, ar.beta_measured > cr.beta_0,
            "lambda=" + std::to_string(art.nl.lambda()));
    }

    // --- plateau norm bound ---
    {
        RadialField w = plateau_test_function(1.0 / 3.0, art.grid);
        const double measured = art.model->vnorm_pow(w.values);
        const double bound = cr.J_frak + cr.K_frak;
        add("plateau-bound", "plateau-norm-bound", measured, bound,
            1.0 - measured / bound, measured <= 0.99 * bound, "R=1/3");
    }

    // --- seminorm vs ambient Monte-Carlo oracle (N = 2 only) ---
    if (cfg.verify_mc_oracle && pp.N == 2) {
        const struct {
            const char* name;
            RadialField field;
        } cases[3] = {
            {"plateau-1/3", plateau_test_function(1.0 / 3.0, art.grid)},
            {"hat-1", detail::hat_field(art.grid, 1.0, 1.0)},
            {"bump-1", detail::bump_field(art.grid, 1.0, 1.0)},
        };
        int idx = 0;
        for (const auto& c : cases) {
            const double quad = gagliardo_seminorm(c.field, pp.s, pp.N);
            const McSeminorm mc = mc_ambient_seminorm_2d(
                planar_field(c.field, 0.0, 0.0), 0.0, 0.0, 1.0, pp.p(), cfg.mc_samples,
                cfg.seed + static_cast<std::uint64_t>(idx));
            const double rel = std::abs(quad / mc.value - 1.0);
            add(std::string("seminorm-mc-") + c.name, "seminorm-ambient-oracle", quad,
                mc.value, 0.02 - rel, rel < 0.02, c.name);
            ++idx;
        }
    }

    // --- gradient vs central finite differences ---
    {
        const RadialField u1 = 0.4 * plateau_test_function(1.0 / 3.0, art.grid);
        const RadialField u2 = detail::bump_field(art.grid, 1.5, 0.3);
        double worst = 0.0;
        for (const RadialField* u : {&u1, &u2}) {
            for (double mu : {1.0, 0.25}) {
                const auto grad = art.model->gateaux_mu(*u, mu);
                double gmax = 0.0;
                for (double g : grad) gmax = std::max(gmax, std::abs(g));
                const double eps_base = 1e-5 * lp_norm(*u, 2.0, constant_potential(1.0), 2);
                for (std::size_t i = 4; i + 1 < u->values.size(); i += 8) {
                    if (std::abs(grad[i]) < 1e-9 * gmax) continue;
                    RadialField up = *u, um = *u;
                    const double eps = std::max(eps_base, 1e-9);
                    up.values[i] += eps;
                    um.values[i] -= eps;
                    const double fd = (art.model->energy_mu(up, mu).total -
                                       art.model->energy_mu(um, mu).total) /
                                      (2.0 * eps);
                    worst = std::max(worst, std::abs(fd - grad[i]) / std::abs(grad[i]));
                }
            }
        }
        add("gradient-fd", "gradient-finite-difference", worst, 1e-4, 1e-4 - worst,
            worst < 1e-4, "2 fields, mu in {1, 1/4}, every 8th node");
    }
    {
        const RadialField u = detail::bump_field(art.grid, 1.0, 0.5);
        const EnergyBreakdown eb = art.model->energy_mu(u, 0.5);
        const double recomb = pp.s / pp.N * (eb.seminorm_term + eb.v_term) -
                              0.5 * riesz_constant(pp.N) * eb.conv_term;
        const double diff = std::abs(recomb - eb.total);
        add("energy-breakdown", "energy-breakdown-consistency", diff, 1e-12,
            1e-12 - diff, diff <= 1e-12 * std::max(1.0, std::abs(eb.total)), "");
    }

    // --- solve + continuation + transforms + poisson ---
    if (cfg.verify_solve) {
        const double mu0 = cfg.mu_schedule().front();
        art.rim = choose_rim(*art.model, mu0, cfg.seed);
        add("rim-positive", "rim-positivity", art.rim->minimum, 0.0, art.rim->minimum,
            art.rim->minimum > 0.0,
            "rho=" + std::to_string(art.rim->rho) + ", " +
                std::to_string(art.rim->samples) + " samples");

        RadialField e = find_endpoint(*art.model, mu0);
        const double Je = art.model->energy_mu(e, mu0).total;
        add("endpoint-negative", "endpoint-negative-energy", Je, 0.0, -Je, Je < 0.0, "");

        SaddleOptions opts;
        opts.path_points = cfg.path_points;
        opts.tol_residual = cfg.tol_residual;
        opts.tol_level = cfg.tol_level;
        opts.max_iterations = cfg.max_iterations;
        opts.polish = cfg.polish;
        opts.seed = cfg.seed;
        art.cont = continuation(*art.model, cfg.mu_schedule(), opts, art.rim->rho);

        const double level_cap = pp.s / (2.0 * pp.N);
        const double norm_cap = pp.s / (pp.tau - pp.tau_window_lo());
        double worst_level = -INFINITY, worst_norm = -INFINITY, worst_res = 0.0;
        double worst_pair = INFINITY, worst_h = INFINITY;
        bool levels_pos = true;
        for (const SaddleResult& r : art.cont->stages) {
            worst_level = std::max(worst_level, r.c_mu);
            levels_pos = levels_pos && r.c_mu > 0.0;
            worst_norm = std::max(worst_norm, art.model->vnorm_pow(r.u_mu.values));
            worst_res = std::max(worst_res, r.residual);
            const TransformCheck fc = art.model->ff_ratio_check(r.u_mu);
            worst_pair = std::min(worst_pair, fc.margin);
            const auto grid_t = default_audit_grid(art.nl);
            const AssumptionReport ar = verify_assumptions(art.nl, pp, grid_t);
            const TransformCheck hc = art.model->h_transform_check(r.u_mu, r.c_mu, ar.W_inf);
            worst_h = std::min(worst_h, hc.margin);
        }
        add("mp-level-cap", "mp-level-cap", worst_level, level_cap,
            level_cap - worst_level, worst_level < level_cap && levels_pos,
            "worst over schedule");
        add("uniform-norm-cap", "uniform-norm-cap", worst_norm, norm_cap,
            norm_cap - worst_norm, worst_norm < norm_cap, "worst over schedule");
        add("saddle-residual", "saddle-residual", worst_res, cfg.tol_residual,
            cfg.tol_residual - worst_res, worst_res <= cfg.tol_residual, "");
        add("transform-pairing", "transform-pairing-bound", -worst_pair, 0.0, worst_pair,
            worst_pair >= 0.0, "worst margin over schedule");
        add("h-transform", "h-transform-norm-bound", -worst_h, 0.0, worst_h,
            worst_h >= 0.0, "worst margin over schedule");

        add("log-residual", "limit-log-residual", art.cont->log_residual,
            10.0 * cfg.tol_residual, 10.0 * cfg.tol_residual - art.cont->log_residual,
            art.cont->log_residual <= 10.0 * cfg.tol_residual, "");
        add("log-energy-finite", "limit-log-energy-finite", art.cont->log_conv_abs, 0.0,
            0.0, std::isfinite(art.cont->log_conv_abs), "");
        add("nontrivial", "limit-nontrivial", art.cont->u0_norm, 0.5 * art.rim->rho,
            art.cont->u0_norm - 0.5 * art.rim->rho, art.cont->nontrivial, "");
    }

    if (cfg.verify_poisson && pp.N == 2) {
        // exact uniform-ball case
        RadialField ball(art.grid);
        for (std::size_t i = 0; i < art.grid->size(); ++i)
            ball.values[i] = art.grid->node(i) <= 1.0 ? 1.0 : 0.0;
        const PotentialReport pr = poisson_potential_from_density(ball, 2);
        const double model_phi = -riesz_constant(2) * pr.F_mass * std::log(2.0);
        const double dev =
            std::abs(log_potential_at(ball, 2, 2.0) - model_phi) / std::abs(model_phi);
        add("potential-uniform-ball", "potential-uniform-ball", dev, 1e-6, 1e-6 - dev,
            dev < 1e-6, "r=2");

        // five-point residual order on a smooth synthetic density
        RadialField smooth(art.grid);
        for (std::size_t i = 0; i < art.grid->size(); ++i) {
            const double r = art.grid->node(i);
            smooth.values[i] = std::exp(-r * r);
        }
        smooth.values.back() = 0.0;
        const std::vector<double> annulus = {0.3, 0.45, 0.6};
        const double res_h = laplace_residual_2d(smooth, 0.1, annulus);
        const double res_h2 = laplace_residual_2d(smooth, 0.05, annulus);
        const double order = std::log2(res_h / res_h2);
        add("poisson-residual-order", "poisson-five-point-residual", order, 1.8,
            order - 1.8, order >= 1.8, "smooth density, h = 0.1 vs 0.05");

        if (art.cont) {
            art.potential = poisson_potential(art.cont->u0, art.nl, 2);
            const auto ac = asymptotic_check(*art.potential, 2, {40.0});
            add("potential-asymptotics", "potential-asymptotics", ac.deviation, 0.05,
                0.05 - ac.deviation, ac.pass, "r=40");
            bool lg_ok = true;
            double lg_max = 0.0;
            for (const auto& [g, v] : art.potential->lgamma_norms) {
                lg_ok = lg_ok && std::isfinite(v) && v >= 0.0;
                lg_max = std::max(lg_max, v);
            }
            add("weighted-space", "weighted-space-membership", lg_max, 0.0, 0.0, lg_ok,
                "gamma in {0.5, 1, 2}");
            add("log-weighted-F", "limit-log-energy-finite", art.potential->logF_integral,
                0.0, 0.0, std::isfinite(art.potential->logF_integral), "log(1+|x|) weight");

            const double u0_res = laplace_residual_2d(art.cont->u0, art.nl, 0.05,
                                                      {0.2, 0.35, 0.5});
            add("poisson-residual-u0", "poisson-five-point-residual", u0_res, 0.05,
                0.05 - u0_res, u0_res < 0.05, "h=0.05, interior annulus", false);

            const DecayFit df = decay_fit(art.cont->u0, cfg.r_max / 33.0, 0.97 * cfg.r_max,
                                          cr.decay_a);
            add("decay-fit", "limit-decay-fit", df.exponent, cr.decay_a,
                df.sup_ratio, df.bounded_ok, "boundedness surrogate");

            const GmuBoundCheck gb = gmu_convolution_bound(
                art.cont->u0, art.nl, cfg.mu_schedule().back(), {1.0, 2.0, 4.0, 8.0, 16.0});
            add("gmu-bound", "gmu-three-zone-bound", -gb.worst_margin, 0.0,
                gb.worst_margin, gb.pass, "x=" + std::to_string(gb.witness));
        }
    }

    if (write_outputs) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir + "/fields");
        {
            RunConfig echoed = cfg;
            echoed.nl_lambda = art.nl.lambda();  // record the calibrated amplitude
            std::ofstream os(cfg.out_dir + "/config.echo");
            os << echo_config(echoed);
        }
        {
            std::ofstream os(cfg.out_dir + "/report.json");
            os << rep.to_json().dump(2) << "\n";
        }
        if (art.cont) {
            std::ofstream lev(cfg.out_dir + "/levels.csv");
            lev << "mu,c_mu,residual,norm_pow,iterations\n";
            char buf[160];
            nlohmann::ordered_json stages = nlohmann::ordered_json::array();
            int k = 0;
            for (const SaddleResult& r : art.cont->stages) {
                const double np = art.model->vnorm_pow(r.u_mu.values);
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n", r.mu, r.c_mu,
                              r.residual, np, r.iterations);
                lev << buf;
                nlohmann::ordered_json j;
                j["mu"] = r.mu;
                j["c_mu"] = r.c_mu;
                j["residual"] = r.residual;
                j["iterations"] = r.iterations;
                j["path_points"] = r.path_points;
                j["norm_pow"] = np;
                j["converged"] = r.converged;
                stages.push_back(std::move(j));
                write_field_csv(r.u_mu,
                                cfg.out_dir + "/fields/u_mu_" + std::to_string(k) + ".csv");
                ++k;
            }
            std::ofstream sj(cfg.out_dir + "/saddle.json");
            sj << stages.dump(2) << "\n";
            write_field_csv(art.cont->u0, cfg.out_dir + "/fields/u0.csv");
        }
        if (art.potential)
            write_field_csv(art.potential->phi, cfg.out_dir + "/fields/phi.csv");
    }
    return art;
}

}  // namespace choqlog

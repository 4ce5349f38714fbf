#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "choqlog/energy.hpp"
#include "choqlog/grid.hpp"
#include "choqlog/math.hpp"

namespace choqlog {

struct SaddleOptions {
    int path_points = 41;
    double tol_residual = 1e-4;
    double tol_level = 1e-6;
    int max_iterations = 3000;
    int reparam_every = 10;
    double armijo_c1 = 1e-4;
    std::uint64_t seed = 12345;
    bool polish = true;
    int polish_max_iterations = 800;
};

struct SaddleResult {
    double mu = 0.0;
    double c_mu = 0.0;
    RadialField u_mu;
    double residual = 0.0;         // dual-norm surrogate max_i |J'[phi_i]| / ||phi_i||_V
    double residual_scaled = 0.0;  // residual / ||u||_V^{N/s - 1} (scale invariant)
    int iterations = 0;
    int path_points = 0;
    std::vector<double> level_history;
    bool converged = false;
};

/// Scales the plateau profile e0 (support B_{1/4}, flat on B_{1/8}) by doubling until
/// the energy goes negative; the first such multiple is the mountain-pass endpoint.
inline RadialField find_endpoint(const EnergyModel& model, double mu) {
    RadialField e0 = plateau_test_function(0.25, model.grid());
    double t = 1.0;
    for (int k = 0; k <= 40; ++k) {
        RadialField e = t * e0;
        double J;
        try {
            J = model.energy_mu(e, mu).total;
        } catch (const std::overflow_error&) {
            throw std::runtime_error(
                "find_endpoint: no-descent, nonlinearity overflowed before the energy "
                "turned negative (amplitude mis-calibrated)");
        }
        if (J < 0.0) return e;
        t *= 2.0;
    }
    throw std::runtime_error("find_endpoint: no-descent after 2^40 doublings");
}

namespace detail {

/// Smooth random radial profile vanishing at r_max (bump superposition).
inline std::vector<double> random_profile(const RadialGrid& grid, SplitMix64& rng) {
    const int bumps = 6;
    std::vector<double> centers(bumps), widths(bumps), amps(bumps);
    for (int b = 0; b < bumps; ++b) {
        centers[b] = rng.uniform(0.0, 3.0);
        widths[b] = rng.uniform(0.15, 1.0);
        amps[b] = rng.normal();
    }
    std::vector<double> u(grid.size(), 0.0);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double r = grid.node(i);
        double v = 0.0;
        for (int b = 0; b < bumps; ++b) {
            const double z = (r - centers[b]) / widths[b];
            v += amps[b] * std::exp(-z * z);
        }
        u[i] = v;
    }
    return u;
}

}  // namespace detail

struct RimEstimate {
    double rho = 0.0;
    double minimum = INFINITY;   // sampled min of J_mu on the V-norm sphere
    int samples = 0;
};

/// Sampled estimate of the rim infimum inf_{||u||_V = rho} J_mu. The smallness
/// constraint rho < ((2N-1)/(2N))^{(N-s)/N} comes from the geometry proof.
inline RimEstimate rim_minimum(const EnergyModel& model, double mu, double rho,
                               int sample_count, std::uint64_t seed) {
    const auto& pp = model.params();
    const double rho_cap =
        std::pow((2.0 * pp.N - 1.0) / (2.0 * pp.N), (pp.N - pp.s) / pp.N);
    if (!(rho > 0.0 && rho < rho_cap))
        throw std::invalid_argument("rim_minimum: rho must lie in (0, " +
                                    std::to_string(rho_cap) + ")");
    SplitMix64 rng(seed);
    RimEstimate est;
    est.rho = rho;
    est.samples = sample_count;
    for (int k = 0; k < sample_count; ++k) {
        std::vector<double> u = detail::random_profile(*model.grid(), rng);
        RadialField f(model.grid(), std::move(u));
        const double norm = model.vnorm(f.values);
        if (norm == 0.0) { --k; continue; }  // origin never enters the sphere sample
        f *= rho / norm;
        est.minimum = std::min(est.minimum, model.energy_mu(f, mu).total);
    }
    return est;
}

/// Largest dyadic rho whose sampled rim stays close to the pure norm term, backed off
/// two extra halvings so the estimate sits safely below the pass level; used by the
/// pipeline to pick a defensible rim radius.
inline RimEstimate choose_rim(const EnergyModel& model, double mu, std::uint64_t seed,
                              int presamples = 16, int final_samples = 32) {
    const auto& pp = model.params();
    const double cap =
        std::pow((2.0 * pp.N - 1.0) / (2.0 * pp.N), (pp.N - pp.s) / pp.N);
    double rho = 0.98 * cap;
    for (int halvings = 0; halvings < 40; ++halvings, rho *= 0.5) {
        RimEstimate probe = rim_minimum(model, mu, rho, presamples, seed);
        const double norm_term = pp.s / pp.N * std::pow(rho, pp.p());
        if (probe.minimum > 0.6 * norm_term)
            return rim_minimum(model, mu, 0.25 * rho, final_samples, seed);
    }
    throw std::runtime_error("choose_rim: no positive rim found above rho = 2^-40");
}

namespace detail {

struct PathState {
    std::vector<std::vector<double>> pts;
    std::vector<double> energy;
};

inline double diff_vnorm(const EnergyModel& model, const std::vector<double>& a,
                         const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return model.vnorm(d);
}

/// Resample the polyline to equal V-norm arc length (endpoints fixed).
inline void reparameterize(const EnergyModel& model, PathState& path, double mu) {
    const std::size_t P = path.pts.size();
    std::vector<double> cum(P, 0.0);
    for (std::size_t k = 1; k < P; ++k)
        cum[k] = cum[k - 1] + diff_vnorm(model, path.pts[k], path.pts[k - 1]);
    if (cum.back() <= 0.0) return;
    std::vector<std::vector<double>> fresh(P);
    fresh[0] = path.pts[0];
    fresh[P - 1] = path.pts[P - 1];
    for (std::size_t k = 1; k + 1 < P; ++k) {
        const double target = cum.back() * static_cast<double>(k) / (P - 1);
        std::size_t j = 1;
        while (j + 1 < P && cum[j] < target) ++j;
        const double seg = cum[j] - cum[j - 1];
        const double t = seg > 0.0 ? (target - cum[j - 1]) / seg : 0.0;
        std::vector<double> v(path.pts[0].size());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = (1.0 - t) * path.pts[j - 1][i] + t * path.pts[j][i];
        fresh[k] = std::move(v);
    }
    path.pts = std::move(fresh);
    for (std::size_t k = 0; k < P; ++k)
        path.energy[k] = model.energy_mu(RadialField(model.grid(),
                                                     path.pts[k]), mu).total;
}

/// Lumped V-weighted masses used to precondition the nodal gradient.
inline std::vector<double> lumped_mass(const EnergyModel& model) {
    const auto& grid = *model.grid();
    const int N = model.params().N;
    const auto& V = model.potential();
    std::vector<double> m(grid.size(), 0.0);
    for (std::size_t seg = 0; seg + 1 < grid.size(); ++seg) {
        const double a = grid.node(seg), b = grid.node(seg + 1);
        const double rmid = 0.5 * (a + b);
        const double w = 0.5 * (b - a) * sphere_area(N) * V(rmid) * std::pow(rmid, N - 1);
        m[seg] += w;
        m[seg + 1] += w;
    }
    return m;
}

}  // namespace detail

/// Discrete path-deformation mountain pass: relocate the path's energy maximizer
/// along the preconditioned negative gradient (positive part projected), tighten the
/// path by arc length, then finish with a squared-residual descent polish.
inline SaddleResult saddle_search(const EnergyModel& model, double mu, const RadialField& e,
                                  const SaddleOptions& opts,
                                  const std::vector<std::vector<double>>* warm_path = nullptr) {
    const std::size_t P = static_cast<std::size_t>(opts.path_points);
    if (P < 5) throw std::invalid_argument("saddle_search: need at least 5 path points");
    if (model.energy_mu(e, mu).total >= 0.0)
        throw std::invalid_argument("saddle_search: endpoint must have negative energy");
    const std::size_t M = model.grid()->size();

    detail::PathState path;
    path.pts.assign(P, std::vector<double>(M, 0.0));
    if (warm_path && warm_path->size() == P) {
        path.pts = *warm_path;
    } else {
        for (std::size_t k = 0; k < P; ++k) {
            const double t = static_cast<double>(k) / (P - 1);
            for (std::size_t i = 0; i < M; ++i) path.pts[k][i] = t * e.values[i];
        }
    }
    path.energy.resize(P);
    for (std::size_t k = 0; k < P; ++k)
        path.energy[k] =
            model.energy_mu(RadialField(model.grid(), path.pts[k]), mu).total;

    const std::vector<double> mass = detail::lumped_mass(model);
    SaddleResult res;
    res.mu = mu;
    res.path_points = opts.path_points;

    double step_mem = 1.0;
    int stall = 0;
    double last_level = INFINITY;
    int level_stall = 0;

    auto project = [&](std::vector<double>& u) {
        for (double& v : u) v = std::max(v, 0.0);
        u.back() = 0.0;
    };

    // the problem's natural gradient scale is ||u||^{N/s - 1}; tolerances compare
    // against it so that amplitude-calibrated nonlinearities terminate honestly
    const double pm1 = model.params().p() - 1.0;
    auto grad_scale = [&](const std::vector<double>& u) {
        return std::pow(std::max(model.vnorm(u), 1e-100), pm1);
    };

    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const std::size_t m = static_cast<std::size_t>(
            std::max_element(path.energy.begin(), path.energy.end()) -
            path.energy.begin());
        if (m == 0 || m + 1 == P)
            throw std::runtime_error("saddle_search: path-collapse, maximizer at endpoint");

        RadialField um(model.grid(), path.pts[m]);
        std::vector<double> grad = model.gateaux_mu(um, mu);
        const double residual = model.residual_of(grad);
        const double scaled = residual / grad_scale(path.pts[m]);
        res.level_history.push_back(path.energy[m]);

        const double level = path.energy[m];
        if (std::abs(level - last_level) <= opts.tol_level * std::abs(level))
            ++level_stall;
        else
            level_stall = 0;
        last_level = level;
        if (it >= 20 && scaled <= opts.tol_residual && level_stall >= 3) {
            res.u_mu = um;
            res.c_mu = level;
            res.residual = residual;
            res.residual_scaled = scaled;
            res.converged = true;
            break;
        }

        // preconditioned descent direction, last node pinned
        std::vector<double> dir(M);
        double gdot = 0.0;
        for (std::size_t i = 0; i + 1 < M; ++i) {
            dir[i] = grad[i] / mass[i];
            gdot += grad[i] * dir[i];
        }
        dir[M - 1] = 0.0;
        if (gdot <= 0.0) { ++stall; }

        double t = step_mem;
        bool accepted = false;
        std::vector<double> trial(M);
        for (int bt = 0; bt < 45 && gdot > 0.0; ++bt) {
            for (std::size_t i = 0; i < M; ++i) trial[i] = path.pts[m][i] - t * dir[i];
            project(trial);
            const double Jt =
                model.energy_mu(RadialField(model.grid(), trial), mu).total;
            if (Jt <= level - opts.armijo_c1 * t * gdot) {
                path.pts[m] = trial;
                path.energy[m] = Jt;
                step_mem = std::min(t * 2.0, 1e6);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            ++stall;
            step_mem = std::max(step_mem * 0.25, 1e-12);
            if (stall >= 6) break;  // hand over to the polish stage
        } else {
            stall = 0;
        }

        if ((it + 1) % opts.reparam_every == 0) detail::reparameterize(model, path, mu);
    }
    res.iterations = it;

    if (res.u_mu.values.empty()) {
        const std::size_t m = static_cast<std::size_t>(
            std::max_element(path.energy.begin(), path.energy.end()) -
            path.energy.begin());
        res.u_mu = RadialField(model.grid(), path.pts[m]);
        res.c_mu = path.energy[m];
        res.residual = model.weak_residual(res.u_mu, mu);
        res.residual_scaled = res.residual / grad_scale(res.u_mu.values);
    }

    // Squared-residual descent polish: minimize K(u) = 1/2 sum w_i J'(u)[phi_i]^2 by
    // Barzilai-Borwein steps; nabla K = J''(u)[w o J'] comes from central differences
    // of the gradient, so only first derivatives of J are ever assembled.
    if (opts.polish && res.residual_scaled > opts.tol_residual) {
        const std::vector<double>& hn = model.hat_vnorms();
        std::vector<double> u = res.u_mu.values;
        auto grad_of = [&](const std::vector<double>& x) {
            return model.gateaux_mu(RadialField(model.grid(), x), mu);
        };
        auto resid_of = [&](const std::vector<double>& g) { return model.residual_of(g); };
        std::vector<double> g = grad_of(u);
        double best_res = resid_of(g) / grad_scale(u);
        std::vector<double> best_u = u;
        std::vector<double> prev_u, prev_nk;
        double unorm = 0.0;
        for (double v : u) unorm = std::max(unorm, std::abs(v));
        for (int k = 0; k < opts.polish_max_iterations; ++k) {
            // direction v = w o g (w = 1/||phi_i||_V^2), Hessian action by central FD
            std::vector<double> v(u.size());
            double vmax = 0.0;
            for (std::size_t i = 0; i + 1 < u.size(); ++i) {
                v[i] = g[i] / (hn[i] * hn[i]);
                vmax = std::max(vmax, std::abs(v[i]));
            }
            v.back() = 0.0;
            if (vmax == 0.0) break;
            const double eps = 1e-6 * std::max(unorm, 1e-8) / vmax;
            std::vector<double> up = u, um2 = u;
            for (std::size_t i = 0; i < u.size(); ++i) {
                up[i] += eps * v[i];
                um2[i] -= eps * v[i];
            }
            std::vector<double> gp = grad_of(up), gm = grad_of(um2);
            std::vector<double> nk(u.size());
            for (std::size_t i = 0; i < u.size(); ++i)
                nk[i] = (gp[i] - gm[i]) / (2.0 * eps);
            nk.back() = 0.0;

            double alpha;
            if (prev_u.empty()) {
                double nknorm = 0.0;
                for (double x : nk) nknorm += x * x;
                alpha = nknorm > 0.0 ? 1e-3 * std::max(unorm, 1e-8) /
                                           std::sqrt(nknorm)
                                     : 1e-6;
            } else {
                double sy = 0.0, ss = 0.0;
                for (std::size_t i = 0; i < u.size(); ++i) {
                    const double si = u[i] - prev_u[i];
                    const double yi = nk[i] - prev_nk[i];
                    sy += si * yi;
                    ss += si * si;
                }
                alpha = sy > 0.0 ? ss / sy : 1e-3;
            }
            prev_u = u;
            prev_nk = nk;
            for (std::size_t i = 0; i + 1 < u.size(); ++i)
                u[i] = std::max(u[i] - alpha * nk[i], 0.0);
            u.back() = 0.0;
            g = grad_of(u);
            const double r = resid_of(g) / grad_scale(u);
            if (r < best_res) {
                best_res = r;
                best_u = u;
            }
            if (best_res <= 0.5 * opts.tol_residual) break;
        }
        if (best_res < res.residual_scaled) {
            res.u_mu = RadialField(model.grid(), best_u);
            res.residual_scaled = best_res;
            res.residual = model.weak_residual(res.u_mu, mu);
            res.c_mu = model.energy_mu(res.u_mu, mu).total;
        }
        res.converged = res.residual_scaled <= opts.tol_residual;
    }

    if (!res.converged && res.residual_scaled > opts.tol_residual)
        throw std::runtime_error("saddle_search: max-iterations, scaled residual " +
                                 std::to_string(res.residual_scaled) + " above tolerance");
    return res;
}

struct AuditOutcome {
    bool level_ok = false;
    double level_margin = 0.0;
    bool norm_ok = false;
    double norm_margin = 0.0;
    double norm_pow = 0.0;
};

/// Level below s/(2N) and V-norm power below the uniform cap s/(tau - (1-2/N)s).
inline AuditOutcome level_and_norm_audit(const EnergyModel& model,
                                         const SaddleResult& result) {
    const auto& pp = model.params();
    AuditOutcome out;
    const double level_cap = pp.s / (2.0 * pp.N);
    out.level_margin = level_cap - result.c_mu;
    out.level_ok = result.c_mu < level_cap && result.c_mu > 0.0;
    out.norm_pow = model.vnorm_pow(result.u_mu.values);
    const double cap = pp.s / (pp.tau - pp.tau_window_lo());
    out.norm_margin = cap - out.norm_pow;
    out.norm_ok = out.norm_pow < cap;
    return out;
}

struct ContinuationResult {
    std::vector<SaddleResult> stages;
    RadialField u0;
    double log_residual = 0.0;
    double log_conv_abs = 0.0;   // |convolution term| of the log-kernel energy at u0
    double u0_norm = 0.0;        // ||u0||_V
    bool norm_cap_uniform = false;
    bool nontrivial = false;
    bool level_monotone_warning = false;
};

/// Warm-started continuation along the kernel schedule; the last iterate is the
/// limit candidate, audited against the log-kernel problem.
inline ContinuationResult continuation(const EnergyModel& model,
                                       const std::vector<double>& schedule,
                                       const SaddleOptions& opts, double rho_for_nontrivial) {
    if (schedule.empty()) throw std::invalid_argument("continuation: empty schedule");
    for (std::size_t k = 1; k < schedule.size(); ++k)
        if (!(schedule[k] < schedule[k - 1]))
            throw std::invalid_argument("continuation: schedule must decrease");
    const auto& pp = model.params();
    ContinuationResult out;
    RadialField e = find_endpoint(model, schedule.front());

    std::vector<std::vector<double>> warm;
    const std::size_t P = static_cast<std::size_t>(opts.path_points);
    bool cap_ok = true;
    for (double mu : schedule) {
        SaddleResult r = warm.empty()
                             ? saddle_search(model, mu, e, opts)
                             : saddle_search(model, mu, e, opts, &warm);
        const AuditOutcome audit = level_and_norm_audit(model, r);
        cap_ok = cap_ok && audit.norm_ok;
        // next warm start: polyline 0 -> u_mu -> e resampled evenly
        warm.assign(P, std::vector<double>(model.grid()->size(), 0.0));
        const double d1 = model.vnorm(r.u_mu.values);
        std::vector<double> diff(e.values.size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = e.values[i] - r.u_mu.values[i];
        const double d2 = model.vnorm(diff);
        const double total = d1 + d2;
        for (std::size_t k = 0; k < P; ++k) {
            const double arc = total * static_cast<double>(k) / (P - 1);
            std::vector<double>& w = warm[k];
            if (arc <= d1) {
                const double t = d1 > 0.0 ? arc / d1 : 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) w[i] = t * r.u_mu.values[i];
            } else {
                const double t = d2 > 0.0 ? (arc - d1) / d2 : 1.0;
                for (std::size_t i = 0; i < w.size(); ++i)
                    w[i] = (1.0 - t) * r.u_mu.values[i] + t * e.values[i];
            }
        }
        out.stages.push_back(std::move(r));
    }
    out.norm_cap_uniform = cap_ok;
    for (std::size_t k = 1; k < out.stages.size(); ++k) {
        const double a = out.stages[k - 1].c_mu, b = out.stages[k].c_mu;
        if (b > a * 1.2 + 1e-15) out.level_monotone_warning = true;
    }
    out.u0 = out.stages.back().u_mu;
    out.log_residual = model.weak_residual_log(out.u0);
    out.log_conv_abs = std::abs(model.energy_log(out.u0).conv_term);
    out.u0_norm = model.vnorm(out.u0.values);
    out.nontrivial = out.u0_norm > 0.5 * rho_for_nontrivial;
    return out;
}

}  // namespace choqlog

#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "choqlog/constants.hpp"
#include "choqlog/grid.hpp"
#include "choqlog/kernels.hpp"
#include "choqlog/nonlinearity.hpp"
#include "choqlog/radial_core.hpp"

namespace choqlog {

struct PotentialReport {
    RadialField phi;
    double F_mass = 0.0;                   // ||F(u)||_1
    double asymptotic_deviation = 0.0;     // sup over audit radii of |phi + C_N M log r|
    std::map<double, double> lgamma_norms; // weighted integrals, gamma -> value
    double logF_integral = 0.0;            // int log(1+|x|) F(u)
};

namespace detail {

inline double field_mass(const RadialField& g, int N) {
    return sphere_area(N) * integrate_radial(*g.grid, [&](double r) {
        return g(r) * std::pow(r, N - 1);
    }, g.grid->quad_order());
}

inline double fitted_tail_slope(const RadialField& g, double r_lo, double r_hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.grid->size(); ++i) {
        const double r = g.grid->node(i);
        if (r < r_lo || r > r_hi) continue;
        const double v = g.values[i];
        if (v <= 0.0) return INFINITY;  // compact support within the window
        const double x = std::log(r), y = std::log(v);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    if (n < 4) return INFINITY;
    const double dn = static_cast<double>(n);
    return -(dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace detail

/// Exact potential value at an arbitrary radius (quadrature, no nodal interpolation).
inline double log_potential_at(const RadialField& density, int N, double r) {
    return riesz_constant(N) * radial_convolution_at(KernelSpec::log_k(), density, N, r);
}

/// Poisson potential of a given radial density: phi = C_N (log(1/|.|) * g), plus the
/// weighted-space and asymptotics bookkeeping.
inline PotentialReport poisson_potential_from_density(const RadialField& g, int N,
                                                      std::vector<double> gammas = {0.5, 1.0,
                                                                                    2.0}) {
    const double C_N = riesz_constant(N);
    PotentialReport rep;
    rep.F_mass = detail::field_mass(g, N);
    rep.phi = radial_convolution(KernelSpec::log_k(), g, N);
    rep.phi *= C_N;

    const double r_hi = 0.8 * g.grid->r_max();
    for (double r : {0.5 * r_hi, 0.75 * r_hi, r_hi}) {
        const double model = -C_N * rep.F_mass * std::log(r);
        rep.asymptotic_deviation =
            std::max(rep.asymptotic_deviation, std::abs(rep.phi(r) - model));
    }

    for (double gamma : gammas) {
        const double grid_part = sphere_area(N) * integrate_radial(*g.grid, [&](double r) {
            return std::abs(rep.phi(r)) / (1.0 + std::pow(r, N + 2.0 * gamma)) *
                   std::pow(r, N - 1);
        }, g.grid->quad_order());
        // beyond r_max the potential follows -C_N M log r; closed-form tail
        const double R = g.grid->r_max();
        const double tail = sphere_area(N) * C_N * std::abs(rep.F_mass) *
                            std::pow(R, -2.0 * gamma) *
                            (std::log(R) / (2.0 * gamma) + 0.25 / (gamma * gamma));
        rep.lgamma_norms[gamma] = grid_part + tail;
    }
    rep.logF_integral = sphere_area(N) * integrate_radial(*g.grid, [&](double r) {
        return std::log1p(r) * g(r) * std::pow(r, N - 1);
    }, g.grid->quad_order());
    return rep;
}

/// Potential of F(u) for a solved field; requires the fitted tail decay of F(u) to
/// exceed N (guaranteed when u decays at the predicted rate).
inline PotentialReport poisson_potential(const RadialField& u, const Nonlinearity& nl,
                                         int N) {
    RadialField Fu(u.grid);
    for (std::size_t i = 0; i < u.values.size(); ++i) Fu.values[i] = nl.F(u.values[i]);
    const double R = u.grid->r_max();
    const double decay = detail::fitted_tail_slope(Fu, R / std::pow(10.0, 1.5), 0.98 * R);
    if (!(decay > N))
        throw std::runtime_error("poisson_potential: tail-divergence, F(u) decay " +
                                 std::to_string(decay) + " <= N");
    return poisson_potential_from_density(Fu, N);
}

struct AsymptoticCheck {
    bool pass = false;
    bool skipped = false;  // degenerate zero-mass input
    double deviation = 0.0;      // relative deviation at the largest audit radius
    double radius = 0.0;
};

/// |phi(r) / (-C_N M log r) - 1| <= 5% at the largest audit radius.
inline AsymptoticCheck asymptotic_check(const PotentialReport& rep, int N,
                                        const std::vector<double>& audit_radii,
                                        double tol = 0.05) {
    AsymptoticCheck out;
    if (rep.F_mass == 0.0) {
        out.skipped = true;
        out.pass = true;
        return out;
    }
    if (audit_radii.empty()) throw std::invalid_argument("asymptotic_check: no radii");
    out.radius = *std::max_element(audit_radii.begin(), audit_radii.end());
    if (out.radius > rep.phi.grid->r_max())
        throw std::invalid_argument("asymptotic_check: audit radius beyond truncation");
    const double model = -riesz_constant(N) * rep.F_mass * std::log(out.radius);
    out.deviation = std::abs(rep.phi(out.radius) / model - 1.0);
    out.pass = out.deviation <= tol;
    return out;
}

struct DecayFit {
    double exponent = 0.0;       // least-squares slope of log u vs log r
    bool super_polynomial = false;  // compact support in the window
    double sup_ratio = 0.0;      // sup_window u r^a / (value at window start)
    bool bounded_ok = false;     // sup_ratio <= 10
};

/// Tail exponent fit plus the boundedness surrogate for u <~ r^{-a}.
inline DecayFit decay_fit(const RadialField& u, double window_lo, double window_hi,
                          double a) {
    if (!(window_hi > window_lo * std::pow(10.0, 1.5) - 1e-12))
        throw std::invalid_argument("decay_fit: window must span >= 1.5 decades");
    DecayFit out;
    const double slope = detail::fitted_tail_slope(u, window_lo, window_hi);
    if (std::isinf(slope)) {
        // zero tail: flag super-polynomial decay, bound trivially satisfied
        bool nonneg = true;
        for (std::size_t i = 0; i < u.values.size(); ++i)
            if (u.grid->node(i) >= window_lo && u.values[i] < 0.0) nonneg = false;
        if (!nonneg) throw std::runtime_error("decay_fit: nonpositive-field in window");
        out.super_polynomial = true;
        out.exponent = INFINITY;
        out.bounded_ok = true;
        return out;
    }
    out.exponent = slope;
    double start = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < u.grid->size(); ++i) {
        const double r = u.grid->node(i);
        if (r < window_lo || r > window_hi) continue;
        if (u.values[i] <= 0.0) throw std::runtime_error("decay_fit: nonpositive-field");
        const double v = u.values[i] * std::pow(r, a);
        if (start == 0.0) start = v;
        sup = std::max(sup, v);
    }
    out.sup_ratio = sup / start;
    out.bounded_ok = out.sup_ratio <= 10.0;
    return out;
}

struct GmuBoundCheck {
    bool pass = false;
    double worst_margin = 0.0;  // min over samples of bound - lhs
    double witness = 0.0;
    double C = 0.0, C0 = 0.0;
};

/// Three-zone convolution bound: (G_mu * F(u))(x) <= (C/mu)((|x|/2)^{-mu} - 1) + C0
/// with C = ||F(u)||_1 and C0 = sup F(u) int_{B_1} G_mu.
inline GmuBoundCheck gmu_convolution_bound(const RadialField& u, const Nonlinearity& nl,
                                           double mu, const std::vector<double>& x_samples) {
    if (!(mu > 0.0 && mu <= 1.0))
        throw std::invalid_argument("gmu_convolution_bound: mu in (0,1]");
    const int N = nl.N();
    RadialField Fu(u.grid);
    double supF = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        Fu.values[i] = nl.F(u.values[i]);
        supF = std::max(supF, Fu.values[i]);
    }
    GmuBoundCheck out;
    out.C = detail::field_mass(Fu, N);
    out.C0 = supF * sphere_area(N) / (N * (N - mu));  // closed-form ball integral
    out.worst_margin = INFINITY;
    const KernelSpec spec = KernelSpec::g_mu(mu);
    for (double x : x_samples) {
        if (!(x > 0.0)) throw std::invalid_argument("gmu_convolution_bound: x > 0");
        const double lhs = radial_convolution_at(spec, Fu, N, x);
        const double bound =
            out.C / mu * (std::pow(0.5 * x, -mu) - 1.0) + out.C0;
        const double margin = bound - lhs;
        if (margin < out.worst_margin) {
            out.worst_margin = margin;
            out.witness = x;
        }
    }
    out.pass = out.worst_margin >= 0.0;
    return out;
}

/// Five-point Laplacian residual of the reconstructed planar potential: samples
/// (r0, 0) on an interior annulus, evaluates phi by convolution at the stencil radii,
/// and compares -(Delta phi) with the density. Returns the max residual relative to
/// the density scale on the annulus.
inline double laplace_residual_2d(const RadialField& density, double h,
                                  const std::vector<double>& annulus_radii) {
    const int N = 2;
    const KernelSpec logk = KernelSpec::log_k();
    const double C2 = riesz_constant(2);
    double denom = 0.0;
    for (double r : annulus_radii) denom = std::max(denom, std::abs(density(r)));
    if (denom == 0.0) denom = 1.0;
    double worst = 0.0;
    for (double r0 : annulus_radii) {
        if (!(r0 - h > 0.0)) throw std::invalid_argument("laplace_residual_2d: r0 > h");
        auto phi = [&](double rr) {
            return C2 * radial_convolution_at(logk, density, N, rr);
        };
        const double c = phi(r0);
        const double xp = phi(r0 + h), xm = phi(r0 - h);
        const double yp = phi(std::hypot(r0, h));
        const double lap = (xp + xm + 2.0 * yp - 4.0 * c) / (h * h);
        worst = std::max(worst, std::abs(-lap - density(r0)) / denom);
    }
    return worst;
}

inline double laplace_residual_2d(const RadialField& u, const Nonlinearity& nl, double h,
                                  const std::vector<double>& annulus_radii) {
    if (nl.N() != 2)
        throw std::invalid_argument("laplace_residual_2d: wrong-dimension, N = 2 only");
    RadialField Fu(u.grid);
    for (std::size_t i = 0; i < u.values.size(); ++i) Fu.values[i] = nl.F(u.values[i]);
    return laplace_residual_2d(Fu, h, annulus_radii);
}

/// Right-hand side of the interior Holder estimate:
/// (K R^N)^{s/(N-s)} + ||u||_{L^inf(B_2R(x0))} + R^N (int_{B_2R(x0)^c} |u|^{N/s-1}
/// |x0-y|^{-2N})^{s/(N-s)}.
inline double holder_bound_rhs(const RadialField& u, double K, double R, double x0_radius,
                               int N, double s) {
    if (!(R > 0.0)) throw std::invalid_argument("holder_bound_rhs: R > 0");
    const double outer = s / (N - s);
    const double term1 = std::pow(K * std::pow(R, N), outer);

    double sup = 0.0;
    const double lo = std::max(0.0, x0_radius - 2.0 * R), hi = x0_radius + 2.0 * R;
    for (std::size_t i = 0; i < u.grid->size(); ++i) {
        const double r = u.grid->node(i);
        if (r >= lo && r <= hi) sup = std::max(sup, std::abs(u.values[i]));
    }
    for (double r : {lo, hi}) sup = std::max(sup, std::abs(u(r)));

    // angular average of |x0 - y|^{-2N} restricted to |x0 - y| > 2R
    const double pm1 = N / s - 1.0;
    const GaussRule& g = gauss_legendre(12);
    auto cutoff_avg = [&](double rho) {
        const double a = std::abs(x0_radius - rho);
        const double rr = x0_radius * rho;
        double theta_star = 0.0;
        if (a < 2.0 * R) {
            const double s2 = (4.0 * R * R - a * a) / (4.0 * rr);
            if (s2 >= 1.0) return 0.0;  // the whole sphere sits inside B_2R(x0)
            theta_star = 2.0 * std::asin(std::sqrt(s2));
        }
        KahanSum acc;
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double th = theta_star + (pi - theta_star) * 0.5 * (g.x[q] + 1.0);
            const double sh = std::sin(0.5 * th);
            const double d2 = a * a + 4.0 * rr * sh * sh;
            double f = std::pow(d2, -static_cast<double>(N));
            if (N > 2) f *= std::pow(std::sin(th), N - 2);
            acc.add(0.5 * g.w[q] * (pi - theta_star) * f);
        }
        return acc.value() / detail::sin_power_total(N);
    };
    const double integral = sphere_area(N) * integrate_radial(*u.grid, [&](double rho) {
        const double uv = std::abs(u(rho));
        if (uv == 0.0) return 0.0;
        return std::pow(uv, pm1) * cutoff_avg(rho) * std::pow(rho, N - 1);
    }, u.grid->quad_order());
    const double term3 = std::pow(R, N) * std::pow(integral, outer);

    const double total = term1 + sup + term3;
    if (!std::isfinite(total)) throw std::runtime_error("holder_bound_rhs: non-finite");
    return total;
}

}  // namespace choqlog

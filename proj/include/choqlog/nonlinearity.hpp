#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "choqlog/constants.hpp"
#include "choqlog/math.hpp"
#include "choqlog/params.hpp"

namespace choqlog {

namespace detail {

/// Cached antiderivative of f(t) = t^q e^{alpha t^gamma} at unit amplitude (F is
/// linear in the amplitude, so one cache serves every lambda rescale).
/// Small arguments (alpha t^gamma <= 20) go through the power series of the
/// quadrature; beyond that, panels in the exponent coordinate hold Chebyshev fits of
/// F whose nodal values come from adaptive quadrature of f. The exponent range stops
/// at 640 so f itself stays representable throughout the build.
class FCache {
  public:
    FCache(double alpha, double q, double gamma) : alpha_(alpha), q_(q), gamma_(gamma) {
        x_hi_ = 640.0;
        const double dx = 2.0;
        auto f = [&](double t) {
            return std::pow(t, q_) * std::exp(alpha_ * std::pow(t, gamma_));
        };
        double x0 = x_lo_;
        double running = series_value(t_at(x_lo_));
        double t_prev = t_at(x_lo_);
        while (x0 < x_hi_) {
            const double x1 = std::min(x0 + dx, x_hi_);
            const double ta = t_at(x0), tb = t_at(x1);
            const std::size_t deg = 16;
            std::vector<double> ts(deg), vals(deg);
            for (std::size_t k = 0; k < deg; ++k) ts[k] = ChebPanel::node(ta, tb, k, deg);
            // visit Chebyshev nodes in increasing order, accumulating increments
            std::vector<std::size_t> order(deg);
            for (std::size_t k = 0; k < deg; ++k) order[k] = k;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return ts[a] < ts[b]; });
            for (std::size_t idx : order) {
                running += adaptive_integrate(f, t_prev, ts[idx], 1e-12, 0.0);
                t_prev = ts[idx];
                vals[idx] = running;
            }
            panels_.emplace_back(ta, tb, std::move(vals));
            x0 = x1;
        }
    }

    double t_at(double x) const { return std::pow(x / alpha_, 1.0 / gamma_); }

    double value(double t) const {
        if (t <= 0.0) return 0.0;
        const double x = alpha_ * std::pow(t, gamma_);
        if (x <= x_lo_) return series_value(t);
        if (x > x_hi_) throw std::overflow_error("Nonlinearity: F argument too large");
        const std::size_t idx =
            std::min(static_cast<std::size_t>((x - x_lo_) / 2.0), panels_.size() - 1);
        // panel edges are exact in x, clamp drift
        const ChebPanel& p = panels_[idx];
        if (t < p.a() && idx > 0) return panels_[idx - 1].eval(t);
        if (t > p.b() && idx + 1 < panels_.size()) return panels_[idx + 1].eval(t);
        return p.eval(t);
    }

  private:
    // F(t) = t^{q+1} sum_m x^m / (m! (q+1+m gamma)), x = alpha t^gamma
    double series_value(double t) const {
        const double x = alpha_ * std::pow(t, gamma_);
        double term = 1.0, sum = 1.0 / (q_ + 1.0);
        for (int m = 1; m < 120; ++m) {
            term *= x / m;
            const double add = term / (q_ + 1.0 + m * gamma_);
            sum += add;
            if (add < 1e-17 * sum) break;
        }
        return std::pow(t, q_ + 1.0) * sum;
    }

    double alpha_, q_, gamma_;
    double x_lo_ = 20.0, x_hi_;
    std::vector<ChebPanel> panels_;
};

}  // namespace detail

/// Model nonlinearity f(t) = lambda t^q e^{alpha t^{N/(N-s)}} for t > 0, zero for
/// t <= 0. Immutable after construction; evaluators are safe to call concurrently.
class Nonlinearity {
  public:
    Nonlinearity() = default;
    Nonlinearity(int N, double s, double lambda, double alpha, double q)
        : N_(N), s_(s), lambda_(lambda), alpha_(alpha), q_(q), gamma_(N / (N - s)) {
        if (!(q > N / s - 1.0))
            throw std::invalid_argument(
                "Nonlinearity: invalid-exponent, need q > N/s - 1 (zero-order condition)");
        if (!(lambda > 0.0 && alpha > 0.0))
            throw std::invalid_argument("Nonlinearity: lambda, alpha > 0");
        cache_ = std::make_shared<detail::FCache>(alpha, q, gamma_);
    }

    double f(double t) const {
        if (t <= 0.0) return 0.0;
        const double x = alpha_ * std::pow(t, gamma_);
        if (x > 700.0) throw std::overflow_error("Nonlinearity: f argument too large");
        return lambda_ * std::pow(t, q_) * std::exp(x);
    }
    double fprime(double t) const {
        if (t <= 0.0) return 0.0;
        const double x = alpha_ * std::pow(t, gamma_);
        if (x > 700.0) throw std::overflow_error("Nonlinearity: f' argument too large");
        return lambda_ * std::exp(x) * std::pow(t, q_ - 1.0) * (q_ + gamma_ * x);
    }
    double F(double t) const { return t <= 0.0 ? 0.0 : lambda_ * cache_->value(t); }

    /// F/f, stable for large arguments (never forms f^2).
    double F_over_f(double t) const {
        if (t <= 0.0) return 0.0;
        return F(t) / f(t);
    }
    /// The ratio F f' / f^2 computed as (F/f)(f'/f).
    double ratio_R(double t) const {
        if (t <= 0.0) return 0.0;
        const double fp_over_f = q_ / t + alpha_ * gamma_ * std::pow(t, gamma_ - 1.0);
        return F_over_f(t) * fp_over_f;
    }
    /// Largest t with alpha t^gamma <= x (working-range helper).
    double t_at_exponent(double x) const { return std::pow(x / alpha_, 1.0 / gamma_); }

    int N() const { return N_; }
    double s() const { return s_; }
    double lambda() const { return lambda_; }
    double alpha() const { return alpha_; }
    double q() const { return q_; }
    double gamma_exp() const { return gamma_; }

    /// Amplitude rescale; the unit-amplitude antiderivative cache is shared.
    Nonlinearity with_lambda(double lambda) const {
        if (!(lambda > 0.0)) throw std::invalid_argument("with_lambda: lambda > 0");
        Nonlinearity out = *this;
        out.lambda_ = lambda;
        return out;
    }

  private:
    int N_ = 2;
    double s_ = 0.5, lambda_ = 1.0, alpha_ = 1.0, q_ = 4.0, gamma_ = 4.0 / 3.0;
    std::shared_ptr<const detail::FCache> cache_;
};

inline Nonlinearity make_model_nonlinearity(int N, double s, double lambda, double alpha,
                                            double q) {
    return Nonlinearity(N, s, lambda, alpha, q);
}

/// Log-spaced audit grid kept inside the range where f(t) F(t) stays representable.
inline std::vector<double> default_audit_grid(const Nonlinearity& nl, double t_min = 1e-4,
                                              std::size_t count = 600) {
    const double x_cap =
        std::max(60.0, 310.0 - std::log(std::max(nl.lambda(), 1.0)));
    const double t_max = nl.t_at_exponent(x_cap);
    std::vector<double> g(count);
    const double l0 = std::log(t_min), l1 = std::log(t_max);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / (count - 1));
    return g;
}

struct AssumptionCheck {
    std::string name;
    bool pass = false;
    double margin = 0.0;
    double witness_t = 0.0;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    double ratio_inf = 0.0;   // inf of F f'/f^2 over the grid
    double ratio_sup = 0.0;
    double beta_measured = 0.0;  // inf over grid cap (T_N, inf) of f F / t^{N/s}
    double W_inf = 0.0;          // sup (N/2s)(F f'/f^2 - 1)^+
    double b1 = 0.0, b2 = 0.0;   // exponential envelope constants
    double M0 = 0.0, s0 = 0.0;   // F <= M0 f beyond s0

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    const AssumptionCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

/// Grid audit of the growth assumptions and their derived consequences. Failures are
/// recorded with witnesses, never thrown.
inline AssumptionReport verify_assumptions(const Nonlinearity& nl, const ProblemParams& pp,
                                           const std::vector<double>& grid,
                                           double f4_threshold = 0.05) {
    pp.validate();
    if (grid.empty()) throw std::invalid_argument("verify_assumptions: empty grid");
    const ConstantsReport cr = constants_bundle(pp, 1.0 / 3.0);
    const double p = pp.p();
    AssumptionReport rep;

    // ratio scan
    double rmin = INFINITY, rmax = -INFINITY, rmin_t = 0, rmax_t = 0;
    for (double t : grid) {
        const double R = nl.ratio_R(t);
        if (R < rmin) { rmin = R; rmin_t = t; }
        if (R > rmax) { rmax = R; rmax_t = t; }
    }
    rep.ratio_inf = rmin;
    rep.ratio_sup = rmax;
    rep.W_inf = 0.5 * pp.N / pp.s * std::max(rmax - 1.0, 0.0);

    {
        AssumptionCheck c{"f1-vanishing", false, 0.0, 0.0};
        c.pass = nl.f(0.0) == 0.0 && nl.f(-1.0) == 0.0 && nl.F(0.0) == 0.0 &&
                 nl.f(grid.front()) > 0.0;
        rep.checks.push_back(c);
    }
    {
        // f = o(t^{N/s-1}) at 0: fitted slope of log(f/t^{p-1}) over the bottom decade
        AssumptionCheck c{"f1-zero-order", false, 0.0, grid.front()};
        const double t0 = grid.front(), t1 = 10.0 * t0;
        const double y0 = std::log(nl.f(t0) / std::pow(t0, p - 1.0));
        const double y1 = std::log(nl.f(t1) / std::pow(t1, p - 1.0));
        const double slope = (y1 - y0) / std::log(10.0);
        c.margin = slope;
        c.pass = slope > 0.05;
        rep.checks.push_back(c);
    }
    {
        // exponential envelope: b1 = sup_{t<=1} f, minimal b2 on the grid beyond
        AssumptionCheck c{"f2-envelope", false, 0.0, 0.0};
        const int jstar = phi_trunc_index(pp.N, pp.s);
        double b1 = 0.0;
        for (double t : grid)
            if (t <= 1.0) b1 = std::max(b1, nl.f(t));
        double b2 = 0.0, wit = 0.0;
        for (double t : grid) {
            const double x = cr.alpha_star * std::pow(t, nl.gamma_exp());
            if (x > 700.0) break;
            const double excess = nl.f(t) - b1;
            if (excess <= 0.0) continue;
            const double cnd = excess / phi_mt(x, jstar);
            if (cnd > b2) { b2 = cnd; wit = t; }
        }
        rep.b1 = b1;
        rep.b2 = b2;
        c.pass = std::isfinite(b2);
        c.margin = b2;
        c.witness_t = wit;
        rep.checks.push_back(c);
    }
    {
        AssumptionCheck c{"f3-lower", false, 0.0, rmin_t};
        c.margin = rmin - (1.0 - pp.s + pp.tau);
        c.pass = c.margin >= 0.0;
        rep.checks.push_back(c);
    }
    {
        AssumptionCheck c{"f3-upper", false, 0.0, rmax_t};
        c.margin = (1.0 + cr.mu_N) - rmax;
        c.pass = c.margin > 0.0;
        rep.checks.push_back(c);
    }
    {
        // ratio limit surrogate on the top decade of the grid
        AssumptionCheck c{"f4-limit", false, 0.0, 0.0};
        const double t_hi = grid.back();
        double dev = 0.0, wit = 0.0;
        for (double t : grid)
            if (t >= 0.1 * t_hi) {
                const double d = std::abs(nl.ratio_R(t) - 1.0);
                if (d > dev) { dev = d; wit = t; }
            }
        c.margin = f4_threshold - dev;
        c.pass = dev < f4_threshold;
        c.witness_t = wit;
        rep.checks.push_back(c);
    }
    {
        AssumptionCheck c{"f5-beta", false, 0.0, 0.0};
        double beta = INFINITY, wit = 0.0;
        // the open-interval infimum is controlled by the T_N endpoint as well
        for (double t : grid)
            if (t > cr.T_N) {
                const double v = nl.f(t) * nl.F(t) / std::pow(t, p);
                if (v < beta) { beta = v; wit = t; }
            }
        {
            const double v = nl.f(cr.T_N) * nl.F(cr.T_N) / std::pow(cr.T_N, p);
            if (v < beta) { beta = v; wit = cr.T_N; }
        }
        rep.beta_measured = beta;
        c.margin = beta - cr.beta_0;
        c.pass = beta > cr.beta_0;
        c.witness_t = wit;
        rep.checks.push_back(c);
    }
    {
        // Remark consequence: F(t) <= (s - tau) t f(t) everywhere
        AssumptionCheck c{"remark-ii", true, INFINITY, 0.0};
        for (double t : grid) {
            const double m = (pp.s - pp.tau) * t * nl.f(t) - nl.F(t);
            if (m < c.margin) { c.margin = m; c.witness_t = t; }
        }
        c.pass = c.margin >= 0.0;
        rep.checks.push_back(c);
    }
    {
        // Remark consequence: F <= M0 f beyond s0 (witnesses recorded)
        AssumptionCheck c{"remark-iii", true, 0.0, 1.0};
        double M0 = 0.0;
        for (double t : grid)
            if (t >= 1.0) M0 = std::max(M0, nl.F_over_f(t));
        rep.M0 = M0;
        rep.s0 = 1.0;
        c.margin = M0;
        rep.checks.push_back(c);
    }
    return rep;
}

/// Smallest amplitude (1e-6 relative bisection) such that the measured (f5) constant
/// reaches target_beta; returns the current amplitude unchanged when it already does.
inline double calibrate_amplitude(const Nonlinearity& proto, const ProblemParams& pp,
                                  double target_beta, std::size_t grid_points = 2000) {
    pp.validate();
    const ConstantsReport cr = constants_bundle(pp, 1.0 / 3.0);
    auto beta_of = [&](const Nonlinearity& nl) {
        const auto grid = default_audit_grid(nl, 1e-4, grid_points);
        double beta = nl.f(cr.T_N) * nl.F(cr.T_N) / std::pow(cr.T_N, pp.p());
        for (double t : grid)
            if (t > cr.T_N) beta = std::min(beta, nl.f(t) * nl.F(t) / std::pow(t, pp.p()));
        return beta;
    };
    const double beta0 = beta_of(proto);
    if (beta0 >= target_beta) return proto.lambda();
    double lo = proto.lambda(), hi = proto.lambda();
    for (int i = 0; i < 60 && hi < 1e12; ++i) {
        hi *= 4.0;
        if (beta_of(proto.with_lambda(hi)) >= target_beta) break;
    }
    if (hi >= 1e12 && beta_of(proto.with_lambda(hi)) < target_beta)
        throw std::runtime_error("calibrate_amplitude: unreachable-target (lambda cap 1e12)");
    while (hi / lo - 1.0 > 1e-6) {
        const double mid = std::sqrt(lo * hi);
        (beta_of(proto.with_lambda(mid)) >= target_beta ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace choqlog

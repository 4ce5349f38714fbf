#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace choqlog {

inline constexpr double pi = 3.14159265358979323846264338327950288;

/// Volume of the unit ball in k dimensions, omega_k = pi^{k/2} / Gamma(k/2 + 1).
inline double unit_ball_volume(int k) {
    if (k < 0) throw std::invalid_argument("unit_ball_volume: k < 0");
    return std::pow(pi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

/// Surface measure of S^{N-1}, i.e. N * omega_N.
inline double sphere_area(int N) { return N * unit_ball_volume(N); }

/// Largest integer strictly less than q (so frac_floor(4) == 3, frac_floor(3.5) == 3).
inline long frac_floor(double q) {
    if (!(q > 0)) throw std::invalid_argument("frac_floor: q must be positive");
    return static_cast<long>(std::ceil(q)) - 1;
}

/// q! = q (q-1) ... (q - frac_floor(q)); coincides with the usual factorial for integer q.
inline double frac_factorial(double q) {
    const long m = frac_floor(q);
    double out = 1.0;
    for (long j = 0; j <= m; ++j) out *= (q - static_cast<double>(j));
    return out;
}

/// Compensated (Kahan) accumulator; fixed summation order gives reproducible totals.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Gauss-Legendre rule on [-1, 1]; nodes/weights computed once per order by Newton
/// iteration on P_n and cached.
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

inline const GaussRule& gauss_legendre(int n) {
    static std::array<GaussRule, 33> cache;  // orders 1..32
    if (n < 1 || n > 32) throw std::invalid_argument("gauss_legendre: order out of range");
    GaussRule& r = cache[static_cast<std::size_t>(n)];
    if (!r.x.empty()) return r;
    GaussRule fresh;
    fresh.x.resize(static_cast<std::size_t>(n));
    fresh.w.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            if (n == 1) p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        const double dp = n * (t * p1 - p0) / (t * t - 1.0);
        fresh.x[static_cast<std::size_t>(i)] = t;
        fresh.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    r = std::move(fresh);
    return r;
}

/// Fixed-order Gauss quadrature of fn over [a, b].
template <class Fn>
double gauss_integrate(Fn&& fn, double a, double b, int order) {
    const GaussRule& g = gauss_legendre(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    KahanSum acc;
    for (std::size_t i = 0; i < g.x.size(); ++i) acc.add(g.w[i] * fn(mid + half * g.x[i]));
    return half * acc.value();
}

/// Adaptive quadrature: bisect until G10(whole) agrees with G10(halves).
/// Deterministic recursion order; suited to smooth integrands with endpoint layers.
template <class Fn>
double adaptive_integrate(Fn&& fn, double a, double b, double rel_tol, double abs_floor = 0.0,
                          int max_depth = 48) {
    struct Rec {
        const std::remove_reference_t<Fn>& f;
        double rel;
        double floor;
        double run(double lo, double hi, double whole, int depth) const {
            const double mid = 0.5 * (lo + hi);
            const double left = gauss_integrate(f, lo, mid, 10);
            const double right = gauss_integrate(f, mid, hi, 10);
            const double err = std::abs(left + right - whole);
            if (!std::isfinite(err))
                throw std::overflow_error("adaptive_integrate: non-finite integrand");
            const double scale = std::max(std::abs(left + right), floor);
            if (depth <= 0 || err <= rel * scale) return left + right;
            return run(lo, mid, left, depth - 1) + run(mid, hi, right, depth - 1);
        }
    };
    Rec rec{fn, rel_tol, abs_floor};
    const double whole = gauss_integrate(fn, a, b, 10);
    return rec.run(a, b, whole, max_depth);
}

/// Chebyshev interpolant of degree n-1 on [a, b] (values sampled at Chebyshev points).
class ChebPanel {
  public:
    ChebPanel() = default;
    ChebPanel(double a, double b, std::vector<double> node_values) : a_(a), b_(b) {
        const std::size_t n = node_values.size();
        coef_.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            KahanSum acc;
            for (std::size_t k = 0; k < n; ++k)
                acc.add(node_values[k] * std::cos(j * pi * (k + 0.5) / n));
            coef_[j] = 2.0 / n * acc.value();
        }
    }
    double a() const { return a_; }
    double b() const { return b_; }
    double eval(double x) const {
        const double t = std::clamp(2.0 * (x - a_) / (b_ - a_) - 1.0, -1.0, 1.0);
        double d = 0.0, dd = 0.0;
        for (std::size_t j = coef_.size(); j-- > 1;) {
            const double sv = d;
            d = 2.0 * t * d - dd + coef_[j];
            dd = sv;
        }
        return t * d - dd + 0.5 * coef_[0];
    }
    static double node(double a, double b, std::size_t k, std::size_t n) {
        return 0.5 * (a + b) + 0.5 * (b - a) * std::cos(pi * (k + 0.5) / n);
    }

  private:
    double a_ = 0.0, b_ = 1.0;
    std::vector<double> coef_;
};

/// Truncation index of the Moser-Trudinger series: smallest natural j with j >= N/s.
inline int phi_trunc_index(int N, double s) {
    const double q = N / s;
    int j = static_cast<int>(std::ceil(q));
    if (j < q) ++j;
    return j;
}

/// Phi_{N,s}(t) = e^t - sum_{j=0}^{j*-2} t^j/j!, evaluated cancellation-free for small t
/// by summing the remaining Taylor series.
inline double phi_mt(double t, int jstar) {
    if (t < 0) throw std::invalid_argument("phi_mt: negative argument");
    if (t == 0.0) return 0.0;
    if (t > 700.0) throw std::overflow_error("phi_mt: exponent argument exceeds 700");
    if (t < 0.5 * jstar + 1.0) {
        // sum_{j >= jstar-1} t^j / j!
        double term = 1.0;
        for (int j = 1; j <= jstar - 1; ++j) term *= t / j;
        double sum = term;
        for (int j = jstar; j < jstar + 400; ++j) {
            term *= t / j;
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return sum;
    }
    double partial = 0.0, term = 1.0;
    for (int j = 0; j <= jstar - 2; ++j) {
        partial += term;
        term *= t / (j + 1);
    }
    return std::exp(t) - partial;
}

/// Small deterministic RNG (splitmix64); identical streams on every platform.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller.
    double normal() {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

  private:
    std::uint64_t state_;
};

}  // namespace choqlog

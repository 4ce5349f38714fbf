#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "choqlog/grid.hpp"
#include "choqlog/math.hpp"
#include "choqlog/parallel.hpp"
#include "choqlog/radial_core.hpp"

namespace choqlog {

enum class KernelKind { log_kernel, power_approx };

/// log kind: log(1/t). power-approx kind: G_mu(t) = (t^{-mu} - 1)/mu, mu in (0,1].
struct KernelSpec {
    KernelKind kind = KernelKind::log_kernel;
    double mu = 0.0;

    static KernelSpec log_k() { return {KernelKind::log_kernel, 0.0}; }
    static KernelSpec g_mu(double mu) {
        if (!(mu > 0.0 && mu <= 1.0))
            throw std::invalid_argument("KernelSpec: mu in (0,1] for power-approx");
        return {KernelKind::power_approx, mu};
    }
};

inline double kernel_eval(const KernelSpec& k, double t) {
    if (!(t > 0.0)) throw std::domain_error("kernel_eval: kernel unbounded at t = 0");
    if (k.kind == KernelKind::log_kernel) return -std::log(t);
    return std::expm1(-k.mu * std::log(t)) / k.mu;
}

namespace detail {

// Internal 1-d kernel: 0 = log(1/d), 1 = G_mu, 2 = pure power d^{-mu} (used by the
// Hardy-Littlewood-Sobolev ratio probe).
struct Kern {
    int kind = 0;
    double mu = 0.0;
    double operator()(double d) const {
        switch (kind) {
            case 0: return -std::log(d);
            case 1: return std::expm1(-mu * std::log(d)) / mu;
            default: return std::pow(d, -mu);
        }
    }
    static Kern from(const KernelSpec& k) {
        return k.kind == KernelKind::log_kernel ? Kern{0, 0.0} : Kern{1, k.mu};
    }
};

inline double sin_power_total(int N) {  // int_0^pi sin^{N-2}
    return std::sqrt(pi) * std::tgamma(0.5 * (N - 1)) / std::tgamma(0.5 * N);
}

// Spherical mean of k(|x - y|) over directions of y, |x| = r, |y| = rho.
// d(theta)^2 = (r-rho)^2 + 4 r rho sin^2(theta/2); panels graded toward theta = 0
// where the integrand peaks for r near rho.
inline double angular_average(const Kern& k, double r, double rho, int N) {
    if (r < 0.0 || rho < 0.0) throw std::invalid_argument("angular_average: negative radius");
    const double a = std::abs(r - rho), b = r + rho;
    if (b == 0.0) throw std::domain_error("angular_average: both radii zero");
    if (r == 0.0 || rho == 0.0) return k(b);
    if (k.kind == 0 && N == 2) return -std::log(std::max(r, rho));  // planar mean value

    const double rr = r * rho;
    int levels = 8;
    if (a < b) {
        const double scale = pi * std::sqrt(rr) / std::max(a, 1e-300);
        levels = std::clamp(static_cast<int>(std::ceil(std::log2(scale))) + 4, 8, 48);
    }
    const GaussRule& g = gauss_legendre(8);
    KahanSum acc;
    double hi = pi;
    for (int lev = 0; lev < levels; ++lev) {
        const double lo = pi * std::pow(0.5, lev + 1);
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double th = lo + (hi - lo) * 0.5 * (g.x[q] + 1.0);
            const double sh = std::sin(0.5 * th);
            const double d = std::sqrt(a * a + 4.0 * rr * sh * sh);
            double f = k(d);
            if (N > 2) f *= std::pow(std::sin(th), N - 2);
            acc.add(0.5 * g.w[q] * (hi - lo) * f);
        }
        hi = lo;
    }
    // closing panel [0, hi]: d is essentially constant = a there unless a ~ 0
    if (a > 1e-13 * b) {
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double th = hi * 0.5 * (g.x[q] + 1.0);
            const double sh = std::sin(0.5 * th);
            const double d = std::sqrt(a * a + 4.0 * rr * sh * sh);
            double f = k(d);
            if (N > 2) f *= std::pow(std::sin(th), N - 2);
            acc.add(0.5 * g.w[q] * hi * f);
        }
    } else {
        // exact coincidence r = rho: integrate the local model k(sqrt(rr) theta)
        const double c = std::sqrt(rr);
        if (N > 2) {
            // sin^{N-2} ~ theta^{N-2} kills the singularity; Gauss on the model
            for (std::size_t q = 0; q < g.x.size(); ++q) {
                const double th = hi * 0.5 * (g.x[q] + 1.0);
                acc.add(0.5 * g.w[q] * hi * k(c * th) * std::pow(th, N - 2));
            }
        } else if (k.kind == 0) {
            acc.add(hi * (1.0 - std::log(c * hi)));  // int_0^h log(1/(c t)) dt
        } else {
            const double mu = k.mu;
            if (mu >= 1.0)
                throw std::domain_error("angular_average: divergent at r = rho for mu >= 1");
            const double pow_part = std::pow(c, -mu) * std::pow(hi, 1.0 - mu) / (1.0 - mu);
            acc.add(k.kind == 1 ? (pow_part - hi) / mu : pow_part);
        }
    }
    return acc.value() / sin_power_total(N);
}

}  // namespace detail

/// Spherical mean of the kernel (exposed mainly for tests and the convolution code).
inline double kernel_angular_average(const KernelSpec& k, double r, double rho, int N) {
    return detail::angular_average(detail::Kern::from(k), r, rho, N);
}

// ---------------------------------------------------------------------------
// Radial convolution h(r) = int_0^inf A_k(r, rho) g(rho) N omega_N rho^{N-1} d rho.
// Per-segment Gauss in rho, with geometric refinement of the two segments adjacent
// to the output radius (A_k has an integrable singularity across rho = r).
// ---------------------------------------------------------------------------
namespace detail {

template <class AFn>
double convolve_at(const RadialGrid& grid, const std::vector<double>& gvals, int N,
                   double r_out, const AFn& A) {
    const GaussRule& gq = gauss_legendre(4);
    const double meas = sphere_area(N);
    KahanSum acc;
    auto gval = [&](std::size_t seg, double rho) {
        const double a = grid.node(seg), b = grid.node(seg + 1);
        const double t = (rho - a) / (b - a);
        return (1.0 - t) * gvals[seg] + t * gvals[seg + 1];
    };
    auto plain = [&](std::size_t seg, double lo, double hi) {
        for (std::size_t q = 0; q < gq.x.size(); ++q) {
            const double rho = lo + (hi - lo) * 0.5 * (gq.x[q] + 1.0);
            const double w = 0.5 * gq.w[q] * (hi - lo);
            acc.add(w * A(r_out, rho) * gval(seg, rho) * meas * std::pow(rho, N - 1));
        }
    };
    for (std::size_t seg = 0; seg + 1 < grid.size(); ++seg) {
        const double a = grid.node(seg), b = grid.node(seg + 1);
        if (r_out > a && r_out < b) {
            // split at the singular point, grade toward it from both sides
            for (int side = 0; side < 2; ++side) {
                const double lo = side == 0 ? a : r_out, hi = side == 0 ? r_out : b;
                const double len = hi - lo;
                if (len <= 0.0) continue;
                double fr = 1.0;
                for (int lev = 0; lev < 26; ++lev) {
                    const double nfr = fr * 0.5;
                    const double l0 = side == 0 ? lo + len * (1.0 - fr) : lo + len * nfr;
                    const double l1 = side == 0 ? lo + len * (1.0 - nfr) : lo + len * fr;
                    plain(seg, l0, l1);
                    fr = nfr;
                }
            }
        } else if (r_out == a || r_out == b) {
            const bool at_left = (r_out == a);
            double fr = 1.0;
            for (int lev = 0; lev < 26; ++lev) {
                const double nfr = fr * 0.5;
                const double l0 = at_left ? a + (b - a) * nfr : a + (b - a) * (1.0 - fr);
                const double l1 = at_left ? a + (b - a) * fr : a + (b - a) * (1.0 - nfr);
                plain(seg, l0, l1);
                fr = nfr;
            }
        } else {
            plain(seg, a, b);
        }
    }
    return acc.value();
}

}  // namespace detail

/// Convolution value at an arbitrary radius (not necessarily a grid node).
inline double radial_convolution_at(const KernelSpec& k, const RadialField& g, int N,
                                    double r_out) {
    const detail::Kern kern = detail::Kern::from(k);
    if (r_out > g.grid->r_max() && k.kind == KernelKind::log_kernel) {
        // beyond the truncation radius use the far-field model -mass * log r
        double mass = sphere_area(N) * integrate_radial(*g.grid, [&](double rho) {
            return g(rho) * std::pow(rho, N - 1);
        }, g.grid->quad_order());
        return -mass * std::log(r_out);
    }
    auto A = [&](double r, double rho) { return detail::angular_average(kern, r, rho, N); };
    return detail::convolve_at(*g.grid, g.values, N, r_out, A);
}

/// Nodal convolution h = k * g sampled on g's grid.
inline RadialField radial_convolution(const KernelSpec& k, const RadialField& g, int N) {
    RadialField h(g.grid);
    const detail::Kern kern = detail::Kern::from(k);
    auto A = [&](double r, double rho) { return detail::angular_average(kern, r, rho, N); };
    std::vector<double> out(g.grid->size());
    parallel_blocks(g.grid->size(), [&](std::size_t i) {
        out[i] = detail::convolve_at(*g.grid, g.values, N, g.grid->node(i), A);
    });
    h.values = std::move(out);
    return h;
}

// ---------------------------------------------------------------------------
// Quadrature geometry for the bilinear convolution energy
//   B[F, G] = intint A(r, rho) F(r) G(rho) meas(r) meas(rho) dr drho,
// shared across kernels (cells and base weights are kernel independent; each kernel
// fills its angular averages once). Cells touching the diagonal are graded
// geometrically in d = r - rho against the integrable kernel singularity.
// ---------------------------------------------------------------------------
class ConvGeometry {
  public:
    struct Entry {
        std::uint32_t ia, ib;
        double fa, fb;    // fractions within the segments
        double ra, rb;    // evaluation radii (kept for the kernel fill)
        double base_w;    // quadrature weight including both radial measures
    };

    static std::shared_ptr<const ConvGeometry> get(const GridPtr& grid, int N) {
        static std::mutex mu;
        static std::map<std::pair<const RadialGrid*, int>,
                        std::shared_ptr<const ConvGeometry>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(grid.get(), N);
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, std::make_shared<const ConvGeometry>(grid, N)).first;
        return it->second;
    }

    ConvGeometry(const GridPtr& grid, int N) : grid_(grid), N_(N) { build(); }

    const std::vector<Entry>& entries() const { return entries_; }
    const GridPtr& grid() const { return grid_; }
    int dim() const { return N_; }

  private:
    void add(std::size_t sa, double ra, std::size_t sb, double rb, double w) {
        Entry e;
        e.ia = static_cast<std::uint32_t>(sa);
        e.ib = static_cast<std::uint32_t>(sb);
        e.fa = (ra - grid_->node(sa)) / (grid_->node(sa + 1) - grid_->node(sa));
        e.fb = (rb - grid_->node(sb)) / (grid_->node(sb + 1) - grid_->node(sb));
        e.ra = ra;
        e.rb = rb;
        const double meas = sphere_area(N_);
        e.base_w = w * meas * meas * std::pow(ra, N_ - 1) * std::pow(rb, N_ - 1);
        entries_.push_back(e);
    }

    void build() {
        const auto& nodes = grid_->nodes();
        const std::size_t M = grid_->segments();
        const GaussRule& g3 = gauss_legendre(3);
        const GaussRule& g2 = gauss_legendre(2);

        // diagonal cells: 2 * int_{0<d<h} int of (t, t+d); geometric grading in d
        for (std::size_t i = 0; i < M; ++i) {
            const double a = nodes[i], b = nodes[i + 1], h = b - a;
            double dhi = h;
            for (int lev = 0; lev < 26; ++lev) {
                const double dlo = h * std::pow(0.5, lev + 1);
                for (std::size_t qd = 0; qd < g3.x.size(); ++qd) {
                    const double d = dlo + (dhi - dlo) * 0.5 * (g3.x[qd] + 1.0);
                    const double wd = 0.5 * g3.w[qd] * (dhi - dlo);
                    const double tlen = h - d;
                    if (tlen <= 0.0) continue;
                    for (std::size_t qt = 0; qt < g3.x.size(); ++qt) {
                        const double t = a + tlen * 0.5 * (g3.x[qt] + 1.0);
                        const double wt = 0.5 * g3.w[qt] * tlen;
                        add(i, t + d, i, t, 2.0 * wd * wt);
                    }
                }
                dhi = dlo;
            }
        }
        // adjacent cells in (d, sigma), geometric grading in d toward the corner
        for (std::size_t i = 0; i + 1 < M; ++i) {
            const double a = nodes[i], b = nodes[i + 1], c = nodes[i + 2];
            const double h1 = b - a, h2 = c - b, D = h1 + h2;
            double dhi = D;
            for (int lev = 0; lev < 26; ++lev) {
                const double dlo = D * std::pow(0.5, lev + 1);
                for (std::size_t qd = 0; qd < g3.x.size(); ++qd) {
                    const double d = dlo + (dhi - dlo) * 0.5 * (g3.x[qd] + 1.0);
                    const double wd = 0.5 * g3.w[qd] * (dhi - dlo);
                    const double slo = std::max(0.0, 1.0 - h1 / d);
                    const double shi = std::min(1.0, h2 / d);
                    if (shi <= slo) continue;
                    for (std::size_t qs = 0; qs < g3.x.size(); ++qs) {
                        const double sg = slo + (shi - slo) * 0.5 * (g3.x[qs] + 1.0);
                        const double ws = 0.5 * g3.w[qs] * (shi - slo);
                        add(i + 1, b + sg * d, i, b - (1.0 - sg) * d,
                            2.0 * wd * ws * d);
                    }
                }
                dhi = dlo;
            }
        }
        // separated cells
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = i + 2; j < M; ++j) {
                const double a1 = nodes[i], b1 = nodes[i + 1];
                const double a2 = nodes[j], b2 = nodes[j + 1];
                const double gap = a2 - b1, size = std::max(b1 - a1, b2 - a2);
                const GaussRule& gq = gap < 2.0 * size ? g3 : g2;
                for (std::size_t q1 = 0; q1 < gq.x.size(); ++q1) {
                    const double t = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * gq.x[q1];
                    const double w1 = 0.5 * gq.w[q1] * (b1 - a1);
                    for (std::size_t q2 = 0; q2 < gq.x.size(); ++q2) {
                        const double r = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * gq.x[q2];
                        const double w2 = 0.5 * gq.w[q2] * (b2 - a2);
                        add(j, r, i, t, 2.0 * w1 * w2);
                    }
                }
            }
        }
    }

    GridPtr grid_;
    int N_;
    std::vector<Entry> entries_;
};

/// Kernel-filled convolution quadrature: weights w_e = base_w * A_k(r_e, rho_e).
class ConvPlan {
  public:
    ConvPlan(std::shared_ptr<const ConvGeometry> geom, const KernelSpec& spec)
        : geom_(std::move(geom)), spec_(spec) {
        const auto& es = geom_->entries();
        w_.resize(es.size());
        const detail::Kern kern = detail::Kern::from(spec);
        const int N = geom_->dim();
        const std::size_t nb = 64;
        parallel_blocks(nb, [&](std::size_t b) {
            const std::size_t beg = es.size() * b / nb, end = es.size() * (b + 1) / nb;
            for (std::size_t e = beg; e < end; ++e)
                w_[e] = es[e].base_w * detail::angular_average(kern, es[e].ra, es[e].rb, N);
        });
    }

    const KernelSpec& spec() const { return spec_; }
    const ConvGeometry& geometry() const { return *geom_; }

    /// intint A F(u(r)) F(u(rho)) dmeas dmeas with F composed at quadrature points.
    double quadratic(const std::vector<double>& u,
                     const std::function<double(double)>& F) const {
        const auto& es = geom_->entries();
        const std::size_t nb = 64;
        std::vector<double> partial(nb, 0.0);
        parallel_blocks(nb, [&](std::size_t b) {
            const std::size_t beg = es.size() * b / nb, end = es.size() * (b + 1) / nb;
            KahanSum acc;
            for (std::size_t e = beg; e < end; ++e) {
                const auto& en = es[e];
                const double ua = u[en.ia] * (1.0 - en.fa) + u[en.ia + 1] * en.fa;
                const double ub = u[en.ib] * (1.0 - en.fb) + u[en.ib + 1] * en.fb;
                acc.add(w_[e] * F(ua) * F(ub));
            }
            partial[b] = acc.value();
        });
        KahanSum total;
        for (double v : partial) total.add(v);
        return total.value();
    }

    /// Adds d/du_i of quadratic(u, F) to grad (chain rule through F' = f).
    void add_quadratic_gradient(const std::vector<double>& u,
                                const std::function<double(double)>& F,
                                const std::function<double(double)>& f, double scale,
                                std::vector<double>& grad) const {
        const auto& es = geom_->entries();
        for (std::size_t e = 0; e < es.size(); ++e) {
            const auto& en = es[e];
            const double ua = u[en.ia] * (1.0 - en.fa) + u[en.ia + 1] * en.fa;
            const double ub = u[en.ib] * (1.0 - en.fb) + u[en.ib + 1] * en.fb;
            const double Fa = F(ua), Fb = F(ub);
            const double ga = scale * w_[e] * f(ua) * Fb;
            const double gb = scale * w_[e] * Fa * f(ub);
            grad[en.ia] += ga * (1.0 - en.fa);
            grad[en.ia + 1] += ga * en.fa;
            grad[en.ib] += gb * (1.0 - en.fb);
            grad[en.ib + 1] += gb * en.fb;
        }
    }

  private:
    std::shared_ptr<const ConvGeometry> geom_;
    KernelSpec spec_;
    std::vector<double> w_;
};

// ---------------------------------------------------------------------------
// Inequality probes.
// ---------------------------------------------------------------------------

struct KernelIneqReport {
    bool lower_ok = false;       // G_mu >= log(1/t) on (0,1]
    double lower_min_margin = 0.0;
    double lower_witness = 0.0;
    double C_nu = 0.0;           // minimal empirical constant with G_mu <= C_nu t^{-nu}
    double C_nu_witness = 0.0;
};

/// Checks G_mu >= log(1/.) on grid nodes in (0,1] and measures the minimal C_nu
/// with G_mu(t) <= C_nu t^{-nu} over the whole grid.
inline KernelIneqReport check_kernel_inequalities(double mu, double nu,
                                                  const std::vector<double>& t_grid) {
    if (!(mu > 0.0 && mu <= 1.0))
        throw std::invalid_argument("check_kernel_inequalities: mu in (0,1]");
    if (!(nu > mu)) throw std::invalid_argument("check_kernel_inequalities: nu > mu");
    const KernelSpec gk = KernelSpec::g_mu(mu);
    KernelIneqReport rep;
    rep.lower_ok = true;
    rep.lower_min_margin = INFINITY;
    for (double t : t_grid) {
        if (!(t > 0.0)) throw std::invalid_argument("t grid must be positive");
        const double g = kernel_eval(gk, t);
        if (t <= 1.0) {
            const double margin = g - (-std::log(t));
            if (margin < rep.lower_min_margin) {
                rep.lower_min_margin = margin;
                rep.lower_witness = t;
            }
            if (margin < 0.0) rep.lower_ok = false;
        }
        const double c = g * std::pow(t, nu);
        if (c > rep.C_nu) {
            rep.C_nu = c;
            rep.C_nu_witness = t;
        }
    }
    return rep;
}

struct PhiPowerBoundReport {
    double C_beta = 0.0;
    double witness = 0.0;
    bool finite = false;
};

/// Minimal empirical C with Phi^r(alpha t^gamma) <= C Phi(alpha beta t^gamma).
inline PhiPowerBoundReport phi_power_bound_check(double alpha, double r_pow, double beta,
                                                 const std::vector<double>& t_grid, int N,
                                                 double s) {
    if (!(r_pow > 1.0)) throw std::invalid_argument("phi_power_bound_check: r > 1");
    if (!(beta > r_pow)) throw std::invalid_argument("phi_power_bound_check: beta > r");
    const int jstar = phi_trunc_index(N, s);
    const double gamma = N / (N - s);
    PhiPowerBoundReport rep;
    for (double t : t_grid) {
        const double x = alpha * std::pow(t, gamma);
        if (beta * x > 700.0) continue;  // both sides keep decaying past this point
        const double lhs = std::pow(phi_mt(x, jstar), r_pow);
        const double rhs = phi_mt(beta * x, jstar);
        const double c = lhs / rhs;
        if (c > rep.C_beta) {
            rep.C_beta = c;
            rep.witness = t;
        }
    }
    rep.finite = std::isfinite(rep.C_beta);
    return rep;
}

struct HlsRatioReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

/// Empirical Hardy-Littlewood-Sobolev ratio intint f(x) h(y)/|x-y|^mu over
/// ||f||_q ||h||_r, with the exponent relation 1/q + mu/N + 1/r = 2 enforced.
inline HlsRatioReport hls_ratio(const RadialField& f, const RadialField& h, double mu_exp,
                                double q, double r, int N) {
    if (std::abs(1.0 / q + mu_exp / N + 1.0 / r - 2.0) > 1e-12)
        throw std::invalid_argument("hls_ratio: exponent-mismatch, need 1/q + mu/N + 1/r = 2");
    if (!(q > 1.0 && r > 1.0)) throw std::invalid_argument("hls_ratio: q, r > 1");
    if (!(mu_exp > 0.0 && mu_exp < N)) throw std::invalid_argument("hls_ratio: mu in (0,N)");
    if (f.grid != h.grid) throw std::invalid_argument("hls_ratio: fields share one grid");

    HlsRatioReport rep;
    rep.rhs = lp_norm(f, q, constant_potential(1.0), N) *
              lp_norm(h, r, constant_potential(1.0), N);
    if (rep.rhs == 0.0) return rep;  // f or h vanishes; ratio defined as 0

    auto geom = ConvGeometry::get(f.grid, N);
    const detail::Kern kern{2, mu_exp};
    KahanSum acc;
    for (const auto& e : geom->entries()) {
        const double A = detail::angular_average(kern, e.ra, e.rb, N);
        const double fa = f.values[e.ia] * (1.0 - e.fa) + f.values[e.ia + 1] * e.fa;
        const double hb = h.values[e.ib] * (1.0 - e.fb) + h.values[e.ib + 1] * e.fb;
        const double fb = f.values[e.ib] * (1.0 - e.fb) + f.values[e.ib + 1] * e.fb;
        const double ha = h.values[e.ia] * (1.0 - e.fa) + h.values[e.ia + 1] * e.fa;
        // geometry entries cover r > rho doubled; split symmetrically between f, h
        acc.add(e.base_w * A * 0.5 * (fa * hb + fb * ha));
    }
    rep.lhs = acc.value();
    rep.ratio = rep.lhs / rep.rhs;
    return rep;
}

}  // namespace choqlog

#pragma once

#include <array>
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
#include "choqlog/params.hpp"

namespace choqlog {

using Potential = std::function<double(double)>;

inline Potential constant_potential(double v) {
    return [v](double) { return v; };
}

/// Per-segment Gauss integration of fn(r) over [0, r_max].
template <class Fn>
double integrate_radial(const RadialGrid& grid, Fn&& fn, int order) {
    const GaussRule& g = gauss_legendre(order);
    KahanSum acc;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double a = grid.node(i), b = grid.node(i + 1);
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t q = 0; q < g.x.size(); ++q)
            acc.add(half * g.w[q] * fn(mid + half * g.x[q]));
    }
    return acc.value();
}

/// Weighted Lebesgue norm (N omega_N int V |u|^p r^{N-1} dr)^{1/p}.
inline double lp_norm(const RadialField& u, double p, const Potential& V, int N) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p >= 1 required");
    const double val = integrate_radial(*u.grid, [&](double r) {
        return V(r) * std::pow(std::abs(u(r)), p) * std::pow(r, N - 1);
    }, u.grid->quad_order());
    return std::pow(sphere_area(N) * val, 1.0 / p);
}

/// Moser-Trudinger functional N omega_N int Phi_{N,s}(alpha |u|^{N/(N-s)}) r^{N-1} dr.
/// phi_mt throws overflow_error once the exponent argument exceeds 700.
inline double mt_functional(const RadialField& u, double alpha, int N, double s) {
    if (!(alpha > 0.0)) throw std::invalid_argument("mt_functional: alpha > 0");
    const int jstar = phi_trunc_index(N, s);
    const double gamma = N / (N - s);
    const double val = integrate_radial(*u.grid, [&](double r) {
        return phi_mt(alpha * std::pow(std::abs(u(r)), gamma), jstar) * std::pow(r, N - 1);
    }, u.grid->quad_order());
    return sphere_area(N) * val;
}

/// Plateau profile: 1 on [0,R/2], linear down to 0 at R, zero beyond. R/2 and R must
/// be grid nodes so the kink radii are represented exactly.
inline RadialField plateau_test_function(double R, const GridPtr& grid) {
    if (!(R > 0.0 && R <= 1.0)) throw std::invalid_argument("plateau: R in (0,1]");
    if (grid->find_node(0.5 * R) == static_cast<std::size_t>(-1) ||
        grid->find_node(R) == static_cast<std::size_t>(-1))
        throw std::invalid_argument("plateau: grid-misaligned, R/2 and R must be nodes");
    RadialField w(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double r = grid->node(i);
        w.values[i] = r <= 0.5 * R ? 1.0 : (r < R ? 2.0 - 2.0 * r / R : 0.0);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Gagliardo seminorm quadrature plan.
//
// For radial u the ambient double integral reduces to
//   [u]^{N/s} = int int |u(r)-u(t)|^{N/s} W(r,t) dr dt,
//   W(r,t) = (N omega_N)^2 r^{N-1} t^{N-1} (r^2+t^2) / |r^2-t^2|^{N+1}.
// The quadrature is assembled cell by cell on the grid. Cells touching the diagonal
// use coordinates (d = r-t, .) with the substitution v = (d/h)^{p-N(+1)} absorbing the
// |r-t|^{N/s-N-1} singular factor (integrable since N/s-N+1 > 0). The zero extension
// beyond r_max enters through the exact formula
//   int_{r_max}^inf t^{N-1}(r^2+t^2)/(t^2-r^2)^{N+1} dt = r_max^N / (N (r_max^2-r^2)^N).
// Every cell becomes flat (segment, fraction, weight) entries, so evaluation and its
// exact nodal gradient are single passes over the arrays.
// ---------------------------------------------------------------------------
class SeminormPlan {
  public:
    struct Key {
        const RadialGrid* grid;
        int N;
        long long s_bits;
        bool operator<(const Key& o) const {
            if (grid != o.grid) return grid < o.grid;
            if (N != o.N) return N < o.N;
            return s_bits < o.s_bits;
        }
    };

    static const SeminormPlan& get(const GridPtr& grid, int N, double s) {
        static std::mutex mu;
        static std::map<Key, std::shared_ptr<const SeminormPlan>> cache;
        const Key key{grid.get(), N, static_cast<long long>(s * 1e12)};
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it == cache.end()) {
            auto plan = std::make_shared<const SeminormPlan>(grid, N, s);
            it = cache.emplace(key, std::move(plan)).first;
        }
        return *it->second;
    }

    SeminormPlan(const GridPtr& grid, int N, double s) : grid_(grid), N_(N), s_(s), p_(N / s) {
        if (!(p_ - N + 1.0 > 0.0))
            throw std::domain_error("SeminormPlan: singular-exponent, N/s - N + 1 <= 0");
        build();
    }

    double p() const { return p_; }
    const GridPtr& grid() const { return grid_; }

    /// [u]^{N/s} for nodal values u (field extended by zero beyond r_max).
    double pow_value(const std::vector<double>& u) const {
        check(u);
        if (is_constant(u)) return 0.0;  // constant profile: differences vanish
        require_vanishing_end(u);
        const std::size_t nb = block_count();
        std::vector<double> partial(nb, 0.0);
        parallel_blocks(nb, [&](std::size_t b) { partial[b] = block_value(u, b); });
        KahanSum acc;
        for (double v : partial) acc.add(v);
        return acc.value();
    }

    /// d/du_i of pow_value; same quadrature, hence exactly consistent with it.
    void pow_gradient(const std::vector<double>& u, std::vector<double>& out) const {
        check(u);
        out.assign(u.size(), 0.0);
        if (is_constant(u)) return;
        require_vanishing_end(u);
        const double p = p_;
        for (std::size_t e = 0; e < pw_.size(); ++e) {
            const PairEntry& pe = pe_[e];
            const double ur = u[pe.ia] * (1.0 - pe.fa) + u[pe.ia + 1] * pe.fa;
            const double ut = u[pe.ib] * (1.0 - pe.fb) + u[pe.ib + 1] * pe.fb;
            const double d = ur - ut;
            if (d == 0.0) continue;
            const double g = pw_[e] * p * signed_pow(d, p - 1.0);
            out[pe.ia] += g * (1.0 - pe.fa);
            out[pe.ia + 1] += g * pe.fa;
            out[pe.ib] -= g * (1.0 - pe.fb);
            out[pe.ib + 1] -= g * pe.fb;
        }
        for (std::size_t e = 0; e < tw_.size(); ++e) {
            const TailEntry& te = te_[e];
            const double ur = u[te.seg] * (1.0 - te.fr) + u[te.seg + 1] * te.fr;
            if (ur == 0.0) continue;
            const double g = tw_[e] * p * signed_pow(ur, p - 1.0);
            out[te.seg] += g * (1.0 - te.fr);
            out[te.seg + 1] += g * te.fr;
        }
    }

    /// Mixed pairing int int |du|^{p-2} du dv W with v = map(u) composed pointwise.
    double pairing_mapped(const std::vector<double>& u,
                          const std::function<double(double)>& map) const {
        check(u);
        KahanSum acc;
        for (std::size_t e = 0; e < pw_.size(); ++e) {
            const PairEntry& pe = pe_[e];
            const double ur = u[pe.ia] * (1.0 - pe.fa) + u[pe.ia + 1] * pe.fa;
            const double ut = u[pe.ib] * (1.0 - pe.fb) + u[pe.ib + 1] * pe.fb;
            const double d = ur - ut;
            if (d == 0.0) continue;
            acc.add(pw_[e] * signed_pow(d, p_ - 1.0) * (map(ur) - map(ut)));
        }
        for (std::size_t e = 0; e < tw_.size(); ++e) {
            const TailEntry& te = te_[e];
            const double ur = u[te.seg] * (1.0 - te.fr) + u[te.seg + 1] * te.fr;
            if (ur == 0.0) continue;
            acc.add(tw_[e] * signed_pow(ur, p_ - 1.0) * (map(ur) - map(0.0)));
        }
        return acc.value();
    }

    /// int int |map(u(r)) - map(u(t))|^p W, composition evaluated at quadrature points.
    double pow_value_mapped(const std::vector<double>& u,
                            const std::function<double(double)>& map) const {
        check(u);
        KahanSum acc;
        for (std::size_t e = 0; e < pw_.size(); ++e) {
            const PairEntry& pe = pe_[e];
            const double ur = u[pe.ia] * (1.0 - pe.fa) + u[pe.ia + 1] * pe.fa;
            const double ut = u[pe.ib] * (1.0 - pe.fb) + u[pe.ib + 1] * pe.fb;
            acc.add(pw_[e] * std::pow(std::abs(map(ur) - map(ut)), p_));
        }
        const double m0 = map(0.0);
        for (std::size_t e = 0; e < tw_.size(); ++e) {
            const TailEntry& te = te_[e];
            const double ur = u[te.seg] * (1.0 - te.fr) + u[te.seg + 1] * te.fr;
            acc.add(tw_[e] * std::pow(std::abs(map(ur) - m0), p_));
        }
        return acc.value();
    }

    /// [phi_i]^p for every nodal hat function, in one pass.
    std::vector<double> hat_pow_values() const {
        std::vector<double> out(grid_->size(), 0.0);
        auto hat = [](std::uint32_t i, std::uint32_t seg, double fr) -> double {
            if (seg == i) return 1.0 - fr;
            if (seg + 1 == i) return fr;
            return 0.0;
        };
        for (std::size_t e = 0; e < pw_.size(); ++e) {
            const PairEntry& pe = pe_[e];
            const std::uint32_t cand[4] = {pe.ia, pe.ia + 1, pe.ib, pe.ib + 1};
            for (int c = 0; c < 4; ++c) {
                const std::uint32_t i = cand[c];
                bool dup = false;
                for (int c2 = 0; c2 < c; ++c2)
                    if (cand[c2] == i) { dup = true; break; }
                if (dup) continue;
                const double d = hat(i, pe.ia, pe.fa) - hat(i, pe.ib, pe.fb);
                if (d != 0.0) out[i] += pw_[e] * std::pow(std::abs(d), p_);
            }
        }
        for (std::size_t e = 0; e < tw_.size(); ++e) {
            const TailEntry& te = te_[e];
            for (std::uint32_t i : {te.seg, te.seg + 1}) {
                const double d = hat(i, te.seg, te.fr);
                if (d != 0.0) out[i] += tw_[e] * std::pow(std::abs(d), p_);
            }
        }
        return out;
    }

    static double signed_pow(double x, double e) {
        return x >= 0.0 ? std::pow(x, e) : -std::pow(-x, e);
    }

  private:
    struct PairEntry {
        std::uint32_t ia, ib;  // segment indices of the two evaluation points
        double fa, fb;         // fractions along the segments
    };
    struct TailEntry {
        std::uint32_t seg;
        double fr;
    };

    void check(const std::vector<double>& u) const {
        if (u.size() != grid_->size())
            throw std::invalid_argument("SeminormPlan: field/grid size mismatch");
    }
    static bool is_constant(const std::vector<double>& u) {
        for (double v : u)
            if (v != u.front()) return false;
        return true;
    }
    void require_vanishing_end(const std::vector<double>& u) const {
        if (u.back() != 0.0)
            throw std::domain_error(
                "gagliardo seminorm: field must vanish at r_max (zero extension has "
                "infinite seminorm otherwise)");
    }

    std::size_t block_count() const { return blocks_.size(); }

    double block_value(const std::vector<double>& u, std::size_t b) const {
        const auto [pbeg, pend, tbeg, tend] = blocks_[b];
        KahanSum acc;
        const double p = p_;
        const bool p4 = std::abs(p - 4.0) < 1e-14;
        for (std::size_t e = pbeg; e < pend; ++e) {
            const PairEntry& pe = pe_[e];
            const double ur = u[pe.ia] * (1.0 - pe.fa) + u[pe.ia + 1] * pe.fa;
            const double ut = u[pe.ib] * (1.0 - pe.fb) + u[pe.ib + 1] * pe.fb;
            const double d = std::abs(ur - ut);
            if (d == 0.0) continue;
            const double dp = p4 ? (d * d) * (d * d) : std::pow(d, p);
            acc.add(pw_[e] * dp);
        }
        for (std::size_t e = tbeg; e < tend; ++e) {
            const TailEntry& te = te_[e];
            const double ur = std::abs(u[te.seg] * (1.0 - te.fr) + u[te.seg + 1] * te.fr);
            if (ur == 0.0) continue;
            const double dp = p4 ? (ur * ur) * (ur * ur) : std::pow(ur, p);
            acc.add(tw_[e] * dp);
        }
        return acc.value();
    }

    void add_pair(std::uint32_t ia, double ra, std::uint32_t ib, double rb, double w) {
        PairEntry pe;
        pe.ia = ia;
        pe.ib = ib;
        pe.fa = (ra - grid_->node(ia)) / (grid_->node(ia + 1) - grid_->node(ia));
        pe.fb = (rb - grid_->node(ib)) / (grid_->node(ib + 1) - grid_->node(ib));
        pe_.push_back(pe);
        pw_.push_back(w);
    }

    double sfac(double r, double t) const {
        // (N omega_N)^2 r^{N-1} t^{N-1} (r^2+t^2) / (r+t)^{N+1}
        return pref2_ * std::pow(r * t, N_ - 1) * (r * r + t * t) /
               std::pow(r + t, N_ + 1);
    }

    void build() {
        const auto& nodes = grid_->nodes();
        const std::size_t M = grid_->segments();
        pref2_ = sphere_area(N_) * sphere_area(N_);
        const double p = p_;

        // diagonal cells: 2 * int_0^h d^{-N-1} [ int_a^{b-d} |du|^p S(t+d,t) dt ] dd,
        // with v = (d/h)^{p-N} flattening d^{p-N-1}.
        const GaussRule& gv = gauss_legendre(8);
        const GaussRule& gt = gauss_legendre(4);
        for (std::size_t i = 0; i < M; ++i) {
            const double a = nodes[i], b = nodes[i + 1], h = b - a;
            const double m = p - N_;  // > 0
            for (std::size_t qv = 0; qv < gv.x.size(); ++qv) {
                const double v = 0.5 * (gv.x[qv] + 1.0);
                const double wv = 0.5 * gv.w[qv];
                const double d = h * std::pow(v, 1.0 / m);
                const double jac = (h / m) * std::pow(v, 1.0 / m - 1.0);
                const double tlen = (b - d) - a;
                if (tlen <= 0.0) continue;
                for (std::size_t qt = 0; qt < gt.x.size(); ++qt) {
                    const double t = a + tlen * 0.5 * (gt.x[qt] + 1.0);
                    const double wt = 0.5 * gt.w[qt] * tlen;
                    const double w =
                        2.0 * wv * jac * wt * sfac(t + d, t) * std::pow(d, -N_ - 1.0);
                    add_pair(static_cast<std::uint32_t>(i), t + d,
                             static_cast<std::uint32_t>(i), t, w);
                }
            }
        }

        // adjacent cells in (d, sigma): r = b + sigma d, t = b - (1-sigma) d.
        const GaussRule& gs = gauss_legendre(6);
        for (std::size_t i = 0; i + 1 < M; ++i) {
            const double a = nodes[i], b = nodes[i + 1], c = nodes[i + 2];
            const double h1 = b - a, h2 = c - b;
            const double d1 = std::min(h1, h2), d2 = std::max(h1, h2), D = h1 + h2;
            auto emit = [&](double d, double wd) {
                const double slo = std::max(0.0, 1.0 - h1 / d);
                const double shi = std::min(1.0, h2 / d);
                if (shi <= slo) return;
                for (std::size_t qs = 0; qs < gs.x.size(); ++qs) {
                    const double sg = slo + (shi - slo) * 0.5 * (gs.x[qs] + 1.0);
                    const double ws = 0.5 * gs.w[qs] * (shi - slo);
                    const double r = b + sg * d, t = b - (1.0 - sg) * d;
                    const double w =
                        2.0 * wd * ws * d * sfac(r, t) * std::pow(d, -N_ - 1.0);
                    add_pair(static_cast<std::uint32_t>(i + 1), r,
                             static_cast<std::uint32_t>(i), t, w);
                }
            };
            // piece 1: (0, d1] with v = (d/d1)^{p-N+1}
            const double m = p - N_ + 1.0;
            for (std::size_t qv = 0; qv < gv.x.size(); ++qv) {
                const double v = 0.5 * (gv.x[qv] + 1.0);
                const double wv = 0.5 * gv.w[qv];
                const double d = d1 * std::pow(v, 1.0 / m);
                const double jac = (d1 / m) * std::pow(v, 1.0 / m - 1.0);
                emit(d, wv * jac);
            }
            // pieces 2 and 3: plain Gauss
            for (auto [lo, hi] : {std::pair{d1, d2}, std::pair{d2, D}}) {
                if (hi - lo < 1e-15 * D) continue;
                for (std::size_t qd = 0; qd < gv.x.size(); ++qd) {
                    const double d = lo + (hi - lo) * 0.5 * (gv.x[qd] + 1.0);
                    emit(d, 0.5 * gv.w[qd] * (hi - lo));
                }
            }
        }

        // separated cells: tensor Gauss, finer for small gap-to-size ratios
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = i + 2; j < M; ++j) {
                const double a1 = nodes[i], b1 = nodes[i + 1];
                const double a2 = nodes[j], b2 = nodes[j + 1];
                const double gap = a2 - b1;
                const double size = std::max(b1 - a1, b2 - a2);
                const int nq = gap < 1.5 * size ? 5 : (gap < 6.0 * size ? 4 : 3);
                const GaussRule& gq = gauss_legendre(nq);
                for (std::size_t q1 = 0; q1 < gq.x.size(); ++q1) {
                    const double t = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * gq.x[q1];
                    const double w1 = 0.5 * gq.w[q1] * (b1 - a1);
                    for (std::size_t q2 = 0; q2 < gq.x.size(); ++q2) {
                        const double r = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * gq.x[q2];
                        const double w2 = 0.5 * gq.w[q2] * (b2 - a2);
                        const double w = 2.0 * w1 * w2 * sfac(r, t) /
                                         std::pow(r - t, N_ + 1.0);
                        add_pair(static_cast<std::uint32_t>(j), r,
                                 static_cast<std::uint32_t>(i), t, w);
                    }
                }
            }
        }

        // zero-extension tail; the last segment is graded toward r_max where the
        // closed-form factor blows up (the vanishing field keeps it integrable).
        const double rmax = grid_->r_max();
        auto tail_weight = [&](double r) {
            return 2.0 * pref2_ * std::pow(r, N_ - 1) * std::pow(rmax, N_) /
                   (N_ * std::pow(rmax * rmax - r * r, N_));
        };
        for (std::size_t i = 0; i < M; ++i) {
            const double a = nodes[i], b = nodes[i + 1];
            const bool last = (i + 1 == M);
            if (!last) {
                for (std::size_t q = 0; q < gt.x.size(); ++q) {
                    const double r = 0.5 * (a + b) + 0.5 * (b - a) * gt.x[q];
                    TailEntry te{static_cast<std::uint32_t>(i), (r - a) / (b - a)};
                    te_.push_back(te);
                    tw_.push_back(0.5 * gt.w[q] * (b - a) * tail_weight(r));
                }
            } else {
                // v = ((rmax-r)/h)^{p-N+1}: with u linear to zero the net integrand
                // |u(r)|^p (rmax-r)^{-N} ~ (rmax-r)^{p-N} becomes linear in v
                const double h = b - a, m = p - N_ + 1.0;
                for (std::size_t qv = 0; qv < gv.x.size(); ++qv) {
                    const double v = 0.5 * (gv.x[qv] + 1.0);
                    const double wv = 0.5 * gv.w[qv];
                    const double y = h * std::pow(v, 1.0 / m);  // distance to r_max
                    const double jac = (h / m) * std::pow(v, 1.0 / m - 1.0);
                    const double r = rmax - y;
                    TailEntry te{static_cast<std::uint32_t>(i), (r - a) / (b - a)};
                    te_.push_back(te);
                    tw_.push_back(wv * jac * tail_weight(r));
                }
            }
        }

        // fixed block partition for deterministic parallel reduction
        const std::size_t nb = 64;
        blocks_.clear();
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t pbeg = pe_.size() * b / nb, pend = pe_.size() * (b + 1) / nb;
            const std::size_t tbeg = te_.size() * b / nb, tend = te_.size() * (b + 1) / nb;
            blocks_.push_back({pbeg, pend, tbeg, tend});
        }
    }

    GridPtr grid_;
    int N_;
    double s_;
    double p_;
    double pref2_ = 0.0;
    std::vector<PairEntry> pe_;
    std::vector<double> pw_;
    std::vector<TailEntry> te_;
    std::vector<double> tw_;
    std::vector<std::array<std::size_t, 4>> blocks_;
};

/// [u]^{N/s}_{s,N/s} (the N/s-th power of the Gagliardo seminorm) by the radial
/// reduction quadrature.
inline double gagliardo_seminorm(const RadialField& u, double s, int N) {
    return SeminormPlan::get(u.grid, N, s).pow_value(u.values);
}

/// ||u||_V^{N/s} = int V |u|^{N/s} dx + [u]^{N/s}.
inline double vnorm_pow(const RadialField& u, const ProblemParams& pp, const Potential& V) {
    const double p = pp.p();
    const double vterm = sphere_area(pp.N) * integrate_radial(*u.grid, [&](double r) {
        return V(r) * std::pow(std::abs(u(r)), p) * std::pow(r, pp.N - 1);
    }, u.grid->quad_order());
    return vterm + gagliardo_seminorm(u, pp.s, pp.N);
}

inline double vnorm(const RadialField& u, const ProblemParams& pp, const Potential& V) {
    return std::pow(vnorm_pow(u, pp, V), pp.s / pp.N);
}

}  // namespace choqlog

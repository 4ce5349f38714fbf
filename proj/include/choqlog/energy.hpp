#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "choqlog/constants.hpp"
#include "choqlog/grid.hpp"
#include "choqlog/kernels.hpp"
#include "choqlog/nonlinearity.hpp"
#include "choqlog/params.hpp"
#include "choqlog/radial_core.hpp"

namespace choqlog {

struct EnergyBreakdown {
    double seminorm_term = 0.0;  // [u]^{N/s}
    double v_term = 0.0;         // int V |u|^{N/s}
    double conv_term = 0.0;      // intint G(|x-y|) F(u(x)) F(u(y))
    double total = 0.0;          // (s/N)(seminorm + v) - (C_N/2) conv
};

struct TransformCheck {
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    double aux = 0.0;  // secondary margin (nodewise check / bound-below-one record)
};

/// Assembles J_mu, its exact discrete Gateaux derivative, the log-kernel energy, and
/// the transform audits, sharing one quadrature plan so that energy and gradient are
/// consistent to roundoff.
class EnergyModel {
  public:
    EnergyModel(GridPtr grid, const ProblemParams& pp, Potential V, Nonlinearity nl)
        : grid_(std::move(grid)), pp_(pp), V_(std::move(V)), nl_(std::move(nl)),
          plan_(&SeminormPlan::get(grid_, pp.N, pp.s)),
          geom_(ConvGeometry::get(grid_, pp.N)), C_N_(riesz_constant(pp.N)) {
        pp_.validate();
        Fmap_ = [n = nl_](double t) { return n.F(t); };
        fmap_ = [n = nl_](double t) { return n.f(t); };
    }

    const ProblemParams& params() const { return pp_; }
    const Nonlinearity& nonlinearity() const { return nl_; }
    const Potential& potential() const { return V_; }
    const GridPtr& grid() const { return grid_; }
    const SeminormPlan& plan() const { return *plan_; }

    double vterm_pow(const std::vector<double>& u) const {
        return vterm_mapped(u, nullptr);
    }
    double vnorm_pow(const std::vector<double>& u) const {
        return vterm_pow(u) + plan_->pow_value(u);
    }
    double vnorm(const std::vector<double>& u) const {
        return std::pow(vnorm_pow(u), pp_.s / pp_.N);
    }

    EnergyBreakdown energy_mu(const RadialField& u, double mu) const {
        return energy_with(u, KernelSpec::g_mu(mu));
    }

    /// Log-kernel energy; requires the fitted tail decay of F(u) to exceed N so the
    /// truncated convolution is meaningful.
    EnergyBreakdown energy_log(const RadialField& u) const {
        require_tail_decay(u);
        return energy_with(u, KernelSpec::log_k());
    }

    std::vector<double> gateaux_mu(const RadialField& u, double mu) const {
        return gateaux_with(u, KernelSpec::g_mu(mu));
    }
    std::vector<double> gateaux_log(const RadialField& u) const {
        return gateaux_with(u, KernelSpec::log_k());
    }

    /// Discrete dual-norm surrogate max_i |J'(u)[phi_i]| / ||phi_i||_V.
    double weak_residual(const RadialField& u, double mu) const {
        return residual_of(gateaux_mu(u, mu));
    }
    double weak_residual_log(const RadialField& u) const {
        return residual_of(gateaux_log(u));
    }

    double residual_of(const std::vector<double>& grad) const {
        const std::vector<double>& hn = hat_vnorms();
        double worst = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i)
            worst = std::max(worst, std::abs(grad[i]) / hn[i]);
        return worst;
    }

    /// F/f transform audit: |v| <= (s-tau)|u| nodewise and the mixed seminorm pairing
    /// bounded by (s-tau)[u]^{N/s}.
    TransformCheck ff_ratio_check(const RadialField& u) const {
        const double st = pp_.s - pp_.tau;
        auto v_of = transform_v();
        TransformCheck out;
        out.aux = INFINITY;
        for (std::size_t i = 0; i < u.values.size(); ++i) {
            const double m = st * std::abs(u.values[i]) - std::abs(v_of(u.values[i]));
            out.aux = std::min(out.aux, m);
        }
        out.measured = plan_->pairing_mapped(u.values, v_of);
        out.bound = st * plan_->pow_value(u.values);
        out.margin = out.bound - out.measured;
        out.pass = out.margin >= 0.0 && out.aux >= -1e-15;
        return out;
    }

    /// H_N transform audit against the reconstructed norm bound
    ///   2s (N/s)! ||W||_inf / ((N/s - floor(N/s)) (tau - (1-2/N)s)) + (N/s) c.
    TransformCheck h_transform_check(const RadialField& u, double c_level,
                                     double W_inf) const {
        const double p = pp_.p();
        if (!(c_level < pp_.s / (2.0 * pp_.N)))
            throw std::invalid_argument("h_transform_check: level must be below s/(2N)");
        auto g = ff_map();
        auto H = [g, half = 0.5 * p](double t) { return t - half * g(t); };
        TransformCheck out;
        out.measured = plan_->pow_value_mapped(u.values, H) + vterm_mapped(u.values, H);
        const double head = 2.0 * pp_.s * frac_factorial(p) * W_inf /
                            ((p - frac_floor(p)) * (pp_.tau - pp_.tau_window_lo()));
        out.bound = head + p * c_level;
        out.margin = out.bound - out.measured;
        out.pass = out.margin >= 0.0;
        out.aux = out.bound;  // callers may additionally check bound < 1 under (f3)
        return out;
    }

    /// Hat-function V-norms used by the residual surrogate (built once).
    const std::vector<double>& hat_vnorms() const {
        std::lock_guard<std::mutex> lock(mu_);
        if (hat_vnorms_.empty()) {
            std::vector<double> sem = plan_->hat_pow_values();
            const double p = pp_.p();
            const GaussRule& g = gauss_legendre(grid_->quad_order());
            const double meas = sphere_area(pp_.N);
            for (std::size_t seg = 0; seg + 1 < grid_->size(); ++seg) {
                const double a = grid_->node(seg), b = grid_->node(seg + 1);
                for (std::size_t q = 0; q < g.x.size(); ++q) {
                    const double r = 0.5 * (a + b) + 0.5 * (b - a) * g.x[q];
                    const double w = 0.5 * g.w[q] * (b - a) * meas * V_(r) *
                                     std::pow(r, pp_.N - 1);
                    const double fr = (r - a) / (b - a);
                    sem[seg] += w * std::pow(1.0 - fr, p);
                    sem[seg + 1] += w * std::pow(fr, p);
                }
            }
            for (double& v : sem) v = std::pow(v, pp_.s / pp_.N);
            hat_vnorms_ = std::move(sem);
        }
        return hat_vnorms_;
    }

    const ConvPlan& conv_plan(const KernelSpec& spec) const {
        const long long key = spec.kind == KernelKind::log_kernel
                                  ? -1
                                  : static_cast<long long>(spec.mu * 1e15);
        std::lock_guard<std::mutex> lock(mu_);
        auto it = conv_plans_.find(key);
        if (it == conv_plans_.end())
            it = conv_plans_.emplace(key, std::make_shared<ConvPlan>(geom_, spec)).first;
        return *it->second;
    }

    /// Fitted log-log tail slope of F(u); +inf stands for a compactly supported tail.
    double f_tail_decay(const RadialField& u) const {
        std::vector<double> rs, vs;
        const double r_hi = grid_->r_max(), r_lo = r_hi / std::pow(10.0, 1.5);
        for (std::size_t i = 0; i < grid_->size(); ++i) {
            const double r = grid_->node(i);
            if (r < r_lo || r > 0.98 * r_hi) continue;
            const double Fv = nl_.F(u.values[i]);
            if (Fv <= 0.0) return INFINITY;  // compact support: super-polynomial decay
            rs.push_back(std::log(r));
            vs.push_back(std::log(Fv));
        }
        if (rs.size() < 4) return INFINITY;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            sx += rs[i]; sy += vs[i]; sxx += rs[i] * rs[i]; sxy += rs[i] * vs[i];
        }
        const double n = static_cast<double>(rs.size());
        return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    }

    std::function<double(double)> ff_map() const {
        return [nl = nl_, q = nl_.q()](double t) {
            if (t <= 0.0) return 0.0;
            const double ft = nl.f(t);
            if (ft < 1e-300) return t / (q + 1.0);  // division guard, exact limit
            return nl.F(t) / ft;
        };
    }

  private:
    std::function<double(double)> transform_v() const {
        const double st = pp_.s - pp_.tau;
        auto g = ff_map();
        return [g, st](double t) { return t > 0.0 ? g(t) : st * t; };
    }

    EnergyBreakdown energy_with(const RadialField& u, const KernelSpec& spec) const {
        EnergyBreakdown out;
        out.seminorm_term = plan_->pow_value(u.values);
        out.v_term = vterm_pow(u.values);
        out.conv_term = conv_plan(spec).quadratic(u.values, Fmap_);
        out.total = pp_.s / pp_.N * (out.seminorm_term + out.v_term) -
                    0.5 * C_N_ * out.conv_term;
        return out;
    }

    std::vector<double> gateaux_with(const RadialField& u, const KernelSpec& spec) const {
        const double p = pp_.p();
        std::vector<double> grad;
        plan_->pow_gradient(u.values, grad);
        const double sn = pp_.s / pp_.N;
        for (double& g : grad) g *= sn;  // (s/N) d[u]^p = plain pairing

        // V term: (s/N) d/du int V|u|^p = int V |u|^{p-2} u phi_i
        const GaussRule& g = gauss_legendre(grid_->quad_order());
        const double meas = sphere_area(pp_.N);
        for (std::size_t seg = 0; seg + 1 < grid_->size(); ++seg) {
            const double a = grid_->node(seg), b = grid_->node(seg + 1);
            for (std::size_t q = 0; q < g.x.size(); ++q) {
                const double fr = 0.5 * (g.x[q] + 1.0);
                const double r = a + fr * (b - a);
                const double uv = u.values[seg] * (1.0 - fr) + u.values[seg + 1] * fr;
                if (uv == 0.0) continue;
                const double w = 0.5 * g.w[q] * (b - a) * meas * V_(r) *
                                 std::pow(r, pp_.N - 1);
                const double c = w * SeminormPlan::signed_pow(uv, p - 1.0);
                grad[seg] += c * (1.0 - fr);
                grad[seg + 1] += c * fr;
            }
        }
        // convolution term: -(C_N/2) d/du intint A F(u) F(u)
        conv_plan(spec).add_quadratic_gradient(u.values, Fmap_, fmap_, -0.5 * C_N_, grad);
        grad.back() = 0.0;  // field is pinned to zero at r_max
        return grad;
    }

    double vterm_mapped(const std::vector<double>& u,
                        const std::function<double(double)>& map) const {
        const double p = pp_.p();
        const GaussRule& g = gauss_legendre(grid_->quad_order());
        const double meas = sphere_area(pp_.N);
        KahanSum acc;
        for (std::size_t seg = 0; seg + 1 < grid_->size(); ++seg) {
            const double a = grid_->node(seg), b = grid_->node(seg + 1);
            for (std::size_t q = 0; q < g.x.size(); ++q) {
                const double fr = 0.5 * (g.x[q] + 1.0);
                const double r = a + fr * (b - a);
                double uv = u[seg] * (1.0 - fr) + u[seg + 1] * fr;
                if (map) uv = map(uv);
                if (uv == 0.0) continue;
                acc.add(0.5 * g.w[q] * (b - a) * meas * V_(r) * std::pow(r, pp_.N - 1) *
                        std::pow(std::abs(uv), p));
            }
        }
        return acc.value();
    }

    void require_tail_decay(const RadialField& u) const {
        const double decay = f_tail_decay(u);
        if (!(decay > pp_.N))
            throw std::runtime_error(
                "energy_log: tail-divergence, fitted F(u) decay " + std::to_string(decay) +
                " does not exceed N");
    }

    GridPtr grid_;
    ProblemParams pp_;
    Potential V_;
    Nonlinearity nl_;
    const SeminormPlan* plan_;
    std::shared_ptr<const ConvGeometry> geom_;
    double C_N_;
    std::function<double(double)> Fmap_, fmap_;
    mutable std::mutex mu_;
    mutable std::map<long long, std::shared_ptr<ConvPlan>> conv_plans_;
    mutable std::vector<double> hat_vnorms_;
};

}  // namespace choqlog

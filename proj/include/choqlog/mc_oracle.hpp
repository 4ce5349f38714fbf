#pragma once

#include <cmath>
#include <functional>

#include "choqlog/grid.hpp"
#include "choqlog/math.hpp"

namespace choqlog {

/// Monte-Carlo estimate of the ambient planar double integral
///   intint |u(x) - u(y)|^p / |x-y|^4 dx dy
/// for a function supported in the disk of radius sup_radius around (cx, cy).
/// Samples x uniformly over the support disk and y = x + z with a two-part importance
/// density (uniform on |z| < 1, ~|z|^{-4} beyond); the pairs with x outside the
/// support are folded in by symmetry. Independent of the radial-reduction quadrature.
struct McSeminorm {
    double value = 0.0;
    double std_error = 0.0;
};

inline McSeminorm mc_ambient_seminorm_2d(const std::function<double(double, double)>& u,
                                         double cx, double cy, double sup_radius, double p,
                                         long samples, std::uint64_t seed) {
    SplitMix64 rng(seed);
    const double area_x = pi * sup_radius * sup_radius;
    KahanSum sum, sumsq;
    for (long n = 0; n < samples; ++n) {
        // x uniform on the support disk
        const double xr = sup_radius * std::sqrt(rng.uniform());
        const double xth = rng.uniform(0.0, 2.0 * pi);
        const double x0 = cx + xr * std::cos(xth), x1 = cy + xr * std::sin(xth);

        // z from the mixture density q
        double z0, z1, q;
        if (rng.uniform() < 0.5) {
            const double zr = std::sqrt(rng.uniform());
            const double zth = rng.uniform(0.0, 2.0 * pi);
            z0 = zr * std::cos(zth);
            z1 = zr * std::sin(zth);
            q = 0.5 / pi;
        } else {
            const double v = rng.uniform();
            const double zr = 1.0 / std::sqrt(std::max(1.0 - v, 1e-300));
            const double zth = rng.uniform(0.0, 2.0 * pi);
            z0 = zr * std::cos(zth);
            z1 = zr * std::sin(zth);
            q = 0.5 * std::pow(zr, -4.0) / pi;
        }
        const double r2 = z0 * z0 + z1 * z1;
        if (r2 == 0.0) continue;
        const double ux = u(x0, x1);
        // antithetic pair (z, -z) halves the variance of the kink-dominated part
        double val = 0.0;
        for (double sgn : {1.0, -1.0}) {
            const double y0 = x0 + sgn * z0, y1 = x1 + sgn * z1;
            const double du = std::abs(ux - u(y0, y1));
            if (du == 0.0) continue;
            double v = std::pow(du, p) / (r2 * r2);
            const double dy = std::hypot(y0 - cx, y1 - cy);
            if (dy > sup_radius) v *= 2.0;  // symmetric fold of x-outside pairs
            val += 0.5 * v * area_x / q;
        }
        sum.add(val);
        sumsq.add(val * val);
    }
    McSeminorm out;
    const double n = static_cast<double>(samples);
    out.value = sum.value() / n;
    const double var = std::max(sumsq.value() / n - out.value * out.value, 0.0);
    out.std_error = std::sqrt(var / n);
    return out;
}

/// Adapter: radial grid field as a planar function centered at (cx, cy).
inline std::function<double(double, double)> planar_field(const RadialField& f, double cx,
                                                          double cy) {
    return [f, cx, cy](double x, double y) { return f(std::hypot(x - cx, y - cy)); };
}

}  // namespace choqlog

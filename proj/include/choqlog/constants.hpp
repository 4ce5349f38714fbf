#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "choqlog/math.hpp"
#include "choqlog/params.hpp"

namespace choqlog {

/// Prefactor of the logarithmic Riesz kernel: C_N = 1 / (2^{N-1} pi^{N/2} Gamma(N/2)).
inline double riesz_constant(int N) {
    if (N < 2) throw std::invalid_argument("riesz_constant: invalid dimension N < 2");
    return 1.0 / (std::pow(2.0, N - 1) * std::pow(pi, 0.5 * N) * std::tgamma(0.5 * N));
}

/// Result of the truncated exponential-integrability series: the value computed from
/// the partial sum, a certified remainder bound, and the number of terms used.
struct AlphaStar {
    double value = 0.0;      // N (pref * S_k)^{s/(N-s)}
    double upper = 0.0;      // same with the certified series tail added
    double remainder = 0.0;  // upper - value
    long terms = 0;
};

namespace detail {

// Series term a_k = (N-1+k)! / (k! (N+2k)^{N/s}) via a stable running product.
inline double alpha_series_term(int N, double exponent, long k) {
    double poly = 1.0;
    for (int i = 1; i <= N - 1; ++i) poly *= (k + i);
    return poly * std::pow(N + 2.0 * k, -exponent);
}

// Tail certificate: a_j <= g(j) := (j+N)^{N-1} (N+2j)^{-N/s}, g decreasing, so
// sum_{j>k} a_j <= integral_k^inf g(x) dx, bounded in closed form via
// (x+N)^{N-1} <= ((k+N)/(k+N/2))^{N-1} (x+N/2)^{N-1} and N+2x = 2(x+N/2), giving
// integral (x+N/2)^{N-1-N/s} = (k+N/2)^{N-N/s} / (N/s - N).
inline double alpha_series_tail_bound(int N, double exponent, long k) {
    const double shift = 0.5 * N;
    const double ratio = std::pow((k + static_cast<double>(N)) / (k + shift), N - 1);
    if (exponent <= N) return INFINITY;  // series would not converge
    return ratio * std::pow(2.0, -exponent) * std::pow(k + shift, N - exponent) /
           (exponent - N);
}

}  // namespace detail

/// Evaluates the explicit upper bound for the sharp Moser-Trudinger exponent,
///   alpha*(s,N) = N (2 (N omega_N)^2 Gamma(1+N/s) / N! * sum_k a_k)^{s/(N-s)},
/// truncating the series once the certified tail falls below tol (as a relative
/// contribution to the final value).
inline AlphaStar alpha_star_upper(int N, double s, double tol, long max_terms = 200'000'000) {
    if (N < 2) throw std::invalid_argument("alpha_star_upper: invalid dimension");
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("alpha_star_upper: s in (0,1)");
    if (!(tol > 0.0)) throw std::invalid_argument("alpha_star_upper: tol > 0");

    const double exponent = N / s;
    double nfact = 1.0;
    for (int i = 2; i <= N; ++i) nfact *= i;
    const double pref =
        2.0 * std::pow(sphere_area(N), 2) * std::tgamma(1.0 + exponent) / nfact;
    const double outer = s / (N - s);

    KahanSum sum;
    AlphaStar out;
    long k = 0;
    for (; k < max_terms; ++k) {
        sum.add(detail::alpha_series_term(N, exponent, k));
        if ((k & 0xff) == 0xff || k < 64) {
            // certified remainder measured directly on the alpha scale
            const double tail = detail::alpha_series_tail_bound(N, exponent, k);
            out.value = N * std::pow(pref * sum.value(), outer);
            out.upper = N * std::pow(pref * (sum.value() + tail), outer);
            out.remainder = out.upper - out.value;
            if (out.remainder <= tol) {
                ++k;
                break;
            }
        }
    }
    out.terms = k;
    if (!(out.remainder <= tol))
        throw std::runtime_error("alpha_star_upper: tolerance-not-reached at iteration cap");
    return out;
}

/// Which reading of the printed growth-window constant to use; the product form is
/// the literal text, the difference form keeps the window nonempty for N = 2.
enum class MuForm { literal, difference };

inline const char* to_string(MuForm f) {
    return f == MuForm::literal ? "literal" : "difference";
}

inline MuForm mu_form_from_string(const std::string& v) {
    if (v == "literal") return MuForm::literal;
    if (v == "difference") return MuForm::difference;
    throw std::invalid_argument("mu-form must be 'literal' or 'difference'");
}

/// V-term bound for the plateau test function (volume-of-ball omega convention,
/// evaluated exactly as printed).
inline double J_frak(int N, double s, double R, double V_upper) {
    if (!(R > 0.0 && R <= 1.0)) throw std::invalid_argument("J_frak: R in (0,1]");
    const double annulus = unit_ball_volume(N - 1) * N * s * (N + 3.0 * s) * R * R /
                           (4.0 * (N + s) * (N + 2.0 * s));
    return V_upper * (unit_ball_volume(N) * std::pow(0.5 * R, N) + annulus);
}

/// Seminorm bound for the plateau test function, literal evaluation.
inline double K_frak(int N, double s) {
    const double X = N / s - N + 1.0;
    if (!(X > 0.0)) throw std::domain_error("K_frak: N/s - N + 1 <= 0");
    const double twoN = std::pow(2.0, N);
    const double bracket =
        3.0 / twoN + (twoN - 2.0) * X / (twoN * (N - 1.0)) + twoN * (1.0 + N / (2.0 * s));
    return N * unit_ball_volume(N) * unit_ball_volume(N) / X * bracket;
}

/// Threshold T_N(s,R) = (2^{s/N} (J + K))^{-s/N}.
inline double T_threshold(int N, double s, double R, double V_upper) {
    const double sum = J_frak(N, s, R, V_upper) + K_frak(N, s);
    return std::pow(std::pow(2.0, s / N) * sum, -s / N);
}

/// Lower-bound constant beta_0 from the level estimate, with R fixed to 1/3.
inline double beta_zero(int N, double s, double V_upper) {
    const double R = 1.0 / 3.0;
    const double sum = J_frak(N, s, R, V_upper) + K_frak(N, s);
    const double omN = unit_ball_volume(N);
    return std::pow(2.0, N / s + N) * std::pow(3.0, N) /
           (omN * omN * riesz_constant(N) * std::log(3.0)) * std::pow(sum, s / N + 1.0);
}

/// Admissible overshoot of the F f'/f^2 ratio. The printed text multiplies tau by
/// (1-2/N)s; the difference reading subtracts it instead.
inline double mu_window(const ProblemParams& pp, MuForm form) {
    const double q = pp.p();
    const double head = (q - frac_floor(q)) / (q * frac_factorial(q));
    const double factor = form == MuForm::literal
                              ? pp.tau * pp.tau_window_lo() / (2.0 * pp.s)
                              : (pp.tau - pp.tau_window_lo()) / (2.0 * pp.s);
    return std::min(pp.s / pp.N, head * factor);
}

/// Every explicit constant the analysis produces, bundled for reporting.
struct ConstantsReport {
    double omega_N = 0.0;
    double C_N = 0.0;
    double alpha_star = 0.0;
    double alpha_star_remainder = 0.0;
    double J_frak = 0.0;       // at the requested R
    double K_frak = 0.0;
    double T_N = 0.0;          // at R = 1/3
    double beta_0 = 0.0;       // at R = 1/3
    double mu_N = 0.0;
    double norm_cap = 0.0;     // s / (tau - (1-2/N)s)
    double decay_a = 0.0;      // s(2N+3) / (2(N-s))
    MuForm mu_form = MuForm::difference;
};

inline ConstantsReport constants_bundle(const ProblemParams& pp, double R,
                                        MuForm form = MuForm::difference,
                                        double alpha_tol = 1e-10) {
    pp.validate();
    if (!(R > 0.0 && R <= 1.0)) throw std::invalid_argument("constants_bundle: R in (0,1]");
    ConstantsReport out;
    out.mu_form = form;
    out.omega_N = unit_ball_volume(pp.N);
    out.C_N = riesz_constant(pp.N);
    const AlphaStar a = alpha_star_upper(pp.N, pp.s, alpha_tol);
    out.alpha_star = a.value;
    out.alpha_star_remainder = a.remainder;
    out.J_frak = J_frak(pp.N, pp.s, R, pp.V_upper);
    out.K_frak = K_frak(pp.N, pp.s);
    out.T_N = T_threshold(pp.N, pp.s, 1.0 / 3.0, pp.V_upper);
    out.beta_0 = beta_zero(pp.N, pp.s, pp.V_upper);
    out.mu_N = mu_window(pp, form);
    out.norm_cap = pp.s / (pp.tau - pp.tau_window_lo());
    out.decay_a = pp.s * (2.0 * pp.N + 3.0) / (2.0 * (pp.N - pp.s));
    return out;
}

}  // namespace choqlog

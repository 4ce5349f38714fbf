#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace choqlog {

/// Envelope of structural parameters: dimension, fractional order, growth exponent
/// window and potential bounds.
struct ProblemParams {
    int N = 2;
    double s = 0.5;
    double tau = 0.25;
    double V_lower = 1.0;
    double V_upper = 1.0;

    double p() const { return N / s; }                    // norm/seminorm exponent
    double gamma_exp() const { return N / (N - s); }      // exponential power in Phi
    double tau_window_lo() const { return (1.0 - 2.0 / N) * s; }

    void validate() const {
        if (N < 2) throw std::invalid_argument("ProblemParams: N >= 2 required");
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("ProblemParams: s in (0,1) required");
        if (!(tau > tau_window_lo() && tau < s))
            throw std::invalid_argument(
                "ProblemParams: tau outside ((1-2/N)s, s) window, got tau=" +
                std::to_string(tau));
        if (!(V_lower > 0.0 && V_lower <= V_upper))
            throw std::invalid_argument("ProblemParams: need 0 < V_lower <= V_upper");
    }
};

}  // namespace choqlog

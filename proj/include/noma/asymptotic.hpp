#pragma once

#include "noma/outage.hpp"

namespace noma {

/// Rates below which outage vanishes as the channel uncertainty goes to zero,
/// without inter-cell interference. +infinity when a denominator vanishes.
struct RateThresholds {
    double R_kt_max_far = 0.0;
    double R_kt_max_near = 0.0;
    double R_k_max_near = 0.0;
};

RateThresholds rate_thresholds(const EffectiveChannel& far, const EffectiveChannel& near,
                               const PairConfig& pair, const NetworkParams& params);

/// Upper end of the admissible Chernoff interval (0, min 1/upsilon_i), upsilon = delta / sigma_h2.
double chernoff_interval(const EffectiveChannel& eff, double sigma_h2);

/// Chernoff bound on the far user's conditional outage for lambda_b = 0.
/// s_bar = 0 gives the trivial value 1; s_bar outside [0, interval) is rejected.
double chernoff_far_bound(const EffectiveChannel& far, const PairConfig& pair,
                          const NetworkParams& params, double sigma_h2, double s_bar);

/// Union-plus-Chernoff bound on the near user's conditional outage (two terms, trivial value 2).
double chernoff_near_bound(const EffectiveChannel& near, const PairConfig& pair,
                           const NetworkParams& params, double sigma_h2, double s_hat);

struct ChernoffOptimum {
    double s = 0.0;
    double bound = 1.0;
};

/// Brent minimisation of the log-bound over the admissible interval.
ChernoffOptimum optimize_chernoff_far(const EffectiveChannel& far, const PairConfig& pair,
                                      const NetworkParams& params, double sigma_h2);
ChernoffOptimum optimize_chernoff_near(const EffectiveChannel& near, const PairConfig& pair,
                                       const NetworkParams& params, double sigma_h2);

} // namespace noma

#pragma once

#include <optional>

#include "noma/geometry.hpp"
#include "noma/laplace.hpp"
#include "noma/model.hpp"

namespace noma {

/// Post-filter view of one user's channel towards all K streams.
struct EffectiveChannel {
    int index = 0;  ///< pair served by this filter (0-based)
    CVector mu;     ///< u^H H_hat v_i
    CMatrix Sigma;  ///< covariance of u^H E V
    RVector delta;  ///< eigenvalues of Sigma, descending
    CMatrix Psi;    ///< matching eigenvectors
    double omega = 0.0;
    double sigma_u2 = 0.0; ///< sigma^2 ||u||^2

    int size() const { return static_cast<int>(mu.size()); }
};

/// Builds the effective channel of a user with filter u, served by column `index` of V.
EffectiveChannel effective_channel(const ChannelEstimate& est, const CMatrix& V, const CVector& u,
                                   int index, const NetworkParams& params);

struct OutageThresholds {
    double tau_kt = 0.0;   ///< far user, conditional
    double theta_k = 0.0;  ///< near user own stage, conditional
    double theta_kt = 0.0; ///< near user SIC stage, conditional
    double tau_kt_bar = 0.0;
    double theta_k_bar = 0.0;
    double theta_kt_bar = 0.0;
};

OutageThresholds outage_thresholds(const EffectiveChannel& far, const EffectiveChannel& near,
                                   const PairConfig& pair, const NetworkParams& params);

enum class OutageMethod { ExactConditional, ExactAverage, Approximate, MonteCarlo };

const char* method_name(OutageMethod method);

/// A single outage probability. `p` is clamped to [0, 1], `raw` is the unclamped value.
struct OutageValue {
    double p = 1.0;
    double raw = 1.0;
    bool infeasible = false; ///< rate split admits no success event
    bool degraded = false;   ///< epsilon table hit a singular difference
};

struct OutageReport {
    OutageValue far;
    OutageValue near;
    OutageMethod method = OutageMethod::ExactConditional;
    std::optional<double> stderr_far;
    std::optional<double> stderr_near;
};

/// Pr(||chi + nu||^2 + X <= threshold) where chi ~ CN(0, Psi diag(delta) Psi^H) and X has
/// Laplace transform `interference`. Nonpositive thresholds give 0.
double success_probability_1d(const CVector& nu, const RVector& delta, const CMatrix& Psi,
                              double threshold, const Transform1D& interference,
                              const Inversion1DConfig& cfg = {});

OutageValue far_outage_conditional(const EffectiveChannel& far, const PairConfig& pair,
                                   const NetworkParams& params, const Inversion1DConfig& cfg = {});

OutageValue far_outage_average(const EffectiveChannel& far, const PairConfig& pair,
                               const NetworkParams& params, const DistanceLaw& law,
                               const Inversion1DConfig& cfg = {},
                               FunctionalMethod method = FunctionalMethod::Auto);
OutageValue far_outage_average(const EffectiveChannel& far, const PairConfig& pair,
                               const NetworkParams& params, GroupingPolicy policy,
                               const Inversion1DConfig& cfg = {},
                               FunctionalMethod method = FunctionalMethod::Auto);

/// Joint success of SIC and own decoding via a two-dimensional inversion.
OutageValue near_outage_conditional_exact(const EffectiveChannel& near, const PairConfig& pair,
                                          const NetworkParams& params,
                                          const Inversion2DConfig& cfg = {});

/// Product of the two stage success probabilities, treating them as independent.
OutageValue near_outage_conditional_approx(const EffectiveChannel& near, const PairConfig& pair,
                                           const NetworkParams& params,
                                           const Inversion1DConfig& cfg = {});

OutageValue near_outage_average(const EffectiveChannel& near, const PairConfig& pair,
                                const NetworkParams& params, const DistanceLaw& law,
                                const Inversion2DConfig& cfg = {},
                                FunctionalMethod method = FunctionalMethod::Auto);
OutageValue near_outage_average(const EffectiveChannel& near, const PairConfig& pair,
                                const NetworkParams& params, GroupingPolicy policy,
                                const Inversion2DConfig& cfg = {},
                                FunctionalMethod method = FunctionalMethod::Auto);

/// Laplace transform of I / (P l(d)) for interferers seen through a filter with coefficient omega.
Transform1D interference_transform(const NetworkParams& params, double omega, double distance);

/// nu with the served entry scaled by `factor`.
CVector scaled_served_entry(const EffectiveChannel& eff, double factor);

} // namespace noma

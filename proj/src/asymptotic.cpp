#include "noma/asymptotic.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <functional>
#include <limits>

namespace noma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMargin = 1e-6;

double log2_ratio(double num, double den)
{
    if (!(den > 0.0)) {
        return num > 0.0 ? kInf : 0.0;
    }
    return std::log2(1.0 + num / den);
}

void require_interference_free(const NetworkParams& params, double sigma_h2)
{
    if (params.lambda_b != 0.0) {
        throw std::invalid_argument("Chernoff bounds assume no inter-cell interference");
    }
    if (!(sigma_h2 > 0.0)) {
        throw std::invalid_argument("Chernoff bounds need sigma_h2 > 0");
    }
}

// Exponent -(s/sigma)(threshold + sum |proj_i|^2/(s ups_i - 1)) of one Chernoff term.
double term_exponent(const EffectiveChannel& eff, const CVector& nu, double threshold,
                     double sigma_h2, double s)
{
    const CVector proj = eff.Psi.adjoint() * nu;
    double inner = threshold;
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
        const double ups = eff.delta(i) / sigma_h2;
        inner += std::norm(proj(i)) / (s * ups - 1.0);
    }
    return -(s / sigma_h2) * inner;
}

double log_det_term(const EffectiveChannel& eff, double sigma_h2, double s)
{
    double sum = 0.0;
    for (Eigen::Index i = 0; i < eff.delta.size(); ++i) {
        sum -= std::log1p(-s * eff.delta(i) / sigma_h2);
    }
    return sum;
}

void check_s(double s, double upper)
{
    if (!(s >= 0.0) || !(s < upper)) {
        throw std::invalid_argument("Chernoff parameter outside the admissible interval");
    }
}

double far_log_bound(const EffectiveChannel& far, const PairConfig& pair,
                     const NetworkParams& params, double sigma_h2, double s)
{
    const OutageThresholds th = outage_thresholds(far, far, pair, params);
    return term_exponent(far, scaled_served_entry(far, pair.beta_k2), th.tau_kt, sigma_h2, s) +
           log_det_term(far, sigma_h2, s);
}

double near_log_bound(const EffectiveChannel& near, const PairConfig& pair,
                      const NetworkParams& params, double sigma_h2, double s)
{
    const OutageThresholds th = outage_thresholds(near, near, pair, params);
    const double floor = pair.beta_k2 * pair.beta_kt2() * std::norm(near.mu(near.index));
    const double a = term_exponent(near, scaled_served_entry(near, pair.beta_k2),
                                   th.theta_kt - floor, sigma_h2, s);
    const double b = term_exponent(near, scaled_served_entry(near, 0.0), th.theta_k, sigma_h2, s);
    const double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi)) + log_det_term(near, sigma_h2, s);
}

// The log-bound is convex in s on the admissible interval.
ChernoffOptimum minimize_log_bound(const std::function<double(double)>& f, double upper)
{
    const auto r = boost::math::tools::brent_find_minima(f, kMargin * upper,
                                                         (1.0 - kMargin) * upper, 52);
    return {r.first, std::exp(r.second)};
}

} // namespace

RateThresholds rate_thresholds(const EffectiveChannel& far, const EffectiveChannel& near,
                               const PairConfig& pair, const NetworkParams& params)
{
    const double b2 = pair.beta_k2;
    const double bt2 = pair.beta_kt2();
    const double far_gain = std::norm(far.mu(far.index));
    const double near_gain = std::norm(near.mu(near.index));
    const double far_noise = far.sigma_u2 / (params.P * params.path_loss(pair.d_kt));
    const double near_noise = near.sigma_u2 / (params.P * params.path_loss(pair.d_k));

    // Psi is unitary, so the projected energies equal the squared norms.
    const double far_energy = (far.Psi.adjoint() * scaled_served_entry(far, b2)).squaredNorm();
    const double nu1_energy = (near.Psi.adjoint() * scaled_served_entry(near, b2)).squaredNorm();
    const double nu2_energy = (near.Psi.adjoint() * scaled_served_entry(near, 0.0)).squaredNorm();

    RateThresholds out;
    out.R_kt_max_far = log2_ratio(bt2 * far_gain, far_energy + b2 * bt2 * far_gain + far_noise);
    out.R_kt_max_near =
        log2_ratio(bt2 * near_gain, nu1_energy + b2 * bt2 * near_gain + near_noise);
    out.R_k_max_near = log2_ratio(near_gain * b2, nu2_energy + near_noise);
    return out;
}

double chernoff_interval(const EffectiveChannel& eff, double sigma_h2)
{
    double upper = kInf;
    for (Eigen::Index i = 0; i < eff.delta.size(); ++i) {
        const double ups = eff.delta(i) / sigma_h2;
        if (ups > 0.0) {
            upper = std::min(upper, 1.0 / ups);
        }
    }
    return upper;
}

double chernoff_far_bound(const EffectiveChannel& far, const PairConfig& pair,
                          const NetworkParams& params, double sigma_h2, double s_bar)
{
    require_interference_free(params, sigma_h2);
    check_s(s_bar, chernoff_interval(far, sigma_h2));
    if (s_bar == 0.0) {
        return 1.0;
    }
    return std::exp(far_log_bound(far, pair, params, sigma_h2, s_bar));
}

double chernoff_near_bound(const EffectiveChannel& near, const PairConfig& pair,
                           const NetworkParams& params, double sigma_h2, double s_hat)
{
    require_interference_free(params, sigma_h2);
    check_s(s_hat, chernoff_interval(near, sigma_h2));
    if (s_hat == 0.0) {
        return 2.0;
    }
    return std::exp(near_log_bound(near, pair, params, sigma_h2, s_hat));
}

ChernoffOptimum optimize_chernoff_far(const EffectiveChannel& far, const PairConfig& pair,
                                      const NetworkParams& params, double sigma_h2)
{
    require_interference_free(params, sigma_h2);
    double upper = chernoff_interval(far, sigma_h2);
    if (std::isinf(upper)) {
        upper = 1e6;
    }
    return minimize_log_bound(
        [&](double s) { return far_log_bound(far, pair, params, sigma_h2, s); }, upper);
}

ChernoffOptimum optimize_chernoff_near(const EffectiveChannel& near, const PairConfig& pair,
                                       const NetworkParams& params, double sigma_h2)
{
    require_interference_free(params, sigma_h2);
    double upper = chernoff_interval(near, sigma_h2);
    if (std::isinf(upper)) {
        upper = 1e6;
    }
    return minimize_log_bound(
        [&](double s) { return near_log_bound(near, pair, params, sigma_h2, s); }, upper);
}

} // namespace noma

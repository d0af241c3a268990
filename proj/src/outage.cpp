#include "noma/outage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <boost/math/tools/minima.hpp>

namespace noma {

namespace {

OutageValue from_success(double q, bool degraded = false)
{
    OutageValue out;
    out.raw = 1.0 - q;
    out.p = std::clamp(out.raw, 0.0, 1.0);
    out.degraded = degraded;
    return out;
}

OutageValue certain_outage(bool infeasible)
{
    OutageValue out;
    out.infeasible = infeasible;
    return out;
}

OutageValue no_outage()
{
    OutageValue out;
    out.p = 0.0;
    out.raw = 0.0;
    return out;
}

double sinr_target(double rate) { return std::exp2(rate) - 1.0; }

// Q = sum delta_i |x_i|^2 with x_i ~ CN(zeta_i / sqrt(delta_i), 1), plus independent I >= 0.
struct QuadraticForm {
    RVector weight; ///< |zeta_i|^2
    RVector delta;

    double mean() const { return weight.sum() + delta.sum(); }
    double spread() const
    {
        return std::sqrt((delta.array().square() + 2.0 * delta.array() * weight.array()).sum());
    }
};

constexpr double kNegligibleLog = -36.8; // log(1e-16)

// log P(Q + I <= y) <= min_u u y + log E exp(-u (Q + I)); concave in y.
double log_lower_tail(const QuadraticForm& q, const Transform1D& interference, double y)
{
    if (y < 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    auto h = [&](double v) {
        const double u = std::exp(v);
        double g = u * y;
        for (Eigen::Index i = 0; i < q.delta.size(); ++i) {
            const double d = 1.0 + u * q.delta(i);
            g -= u * q.weight(i) / d + std::log(d);
        }
        // An underflowed transform says nothing about exp(u y) L(u); skip that u.
        const double li = interference(cplx(u, 0.0)).real();
        return li > 0.0 ? g + std::log(li) : std::numeric_limits<double>::infinity();
    };
    const double scale = std::max(q.mean(), 1e-300);
    const auto r = boost::math::tools::brent_find_minima(h, std::log(1e-6 / scale),
                                                         std::log(1e12 / scale), 40);
    return std::min(0.0, r.second);
}

// log P(Q > y) <= min_u -u y + log E exp(u Q), interference-free forms only.
double log_upper_tail(const QuadraticForm& q, double y)
{
    const double top = 1.0 / q.delta.maxCoeff();
    auto h = [&](double u) {
        double g = -u * y;
        for (Eigen::Index i = 0; i < q.delta.size(); ++i) {
            const double d = 1.0 - u * q.delta(i);
            g += u * q.weight(i) / d - std::log(d);
        }
        return g;
    };
    const auto r = boost::math::tools::brent_find_minima(h, 0.0, top * (1.0 - 1e-12), 40);
    return std::min(0.0, r.second);
}

// Aliasing of the shifted inversion: sum over j >= 1 of e^{jA} P(Q + I <= theta - 2 j t),
// t = theta - c. Terms are log-concave in j, so two of them bound the rest.
bool shift_is_safe(const QuadraticForm& q, const Transform1D& interference, double theta,
                   double c, double A)
{
    const double t = theta - c;
    const double term1 = A + log_lower_tail(q, interference, theta - 2.0 * t);
    if (theta - 4.0 * t < 0.0) {
        return term1 <= kNegligibleLog;
    }
    const double term2 = 2.0 * A + log_lower_tail(q, interference, theta - 4.0 * t);
    if (term2 >= term1) {
        return false;
    }
    const double count = std::floor(theta / (2.0 * t));
    return std::log(std::exp(term1) + count * std::exp(term2)) <= kNegligibleLog;
}

// Noise-free, interference-free gap of the SIC stage.
double sic_floor(const EffectiveChannel& near, const PairConfig& pair)
{
    return pair.beta_k2 * pair.beta_kt2() * std::norm(near.mu(near.index));
}

// exp(-phi(s,t)) / prod(1 + (s+t) delta_i), the error-averaged joint kernel.
struct JointKernel {
    CVector mu;
    RVector delta;
    CMatrix Psi;
    int k = 0;
    double beta_k2 = 0.0;
    double beta_kt2 = 0.0;

    cplx operator()(cplx s, cplx t) const
    {
        const cplx sum = s + t;
        const Eigen::Index n = mu.size();
        cplx phi{};
        cplx denom(1.0, 0.0);
        const cplx b_mu = (s * beta_kt2 + t) * mu(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            cplx a_side{};
            for (Eigen::Index j = 0; j < n; ++j) {
                const cplx a = (j == k) ? s * beta_k2 : sum;
                a_side += std::conj(mu(j)) * a * Psi(j, i);
            }
            const cplx proj = Psi.col(i).dot(mu); // psi_i^H mu
            const cplx b_proj = std::conj(Psi(k, i)) * b_mu;
            const cplx d = 1.0 + sum * delta(i);
            phi += a_side * (delta(i) * b_proj + proj) / d;
            denom *= d;
        }
        return std::exp(-phi) / denom;
    }
};

JointKernel joint_kernel(const EffectiveChannel& near, const PairConfig& pair)
{
    return {near.mu, near.delta, near.Psi, near.index, pair.beta_k2, pair.beta_kt2()};
}

// Memo of a one-variable transform evaluated at s + t on the inversion lattice, where
// s + t takes few distinct values. Lattice arguments share one real part and differ in
// imaginary part by far more than the matching tolerance.
class SumMemo {
public:
    explicit SumMemo(const Transform1D& f) : f_(f) {}

    cplx operator()(cplx z)
    {
        const double tol = 1e-9 * std::max(std::abs(z.imag()), std::abs(z.real()));
        auto it = cache_.lower_bound({z.real(), z.imag() - tol});
        if (it != cache_.end() && it->first.first == z.real() &&
            std::abs(it->first.second - z.imag()) <= tol) {
            return it->second;
        }
        const cplx value = f_(z);
        cache_.emplace(std::pair{z.real(), z.imag()}, value);
        return value;
    }

private:
    const Transform1D& f_;
    std::map<std::pair<double, double>, cplx> cache_;
};

// Shared body of the exact conditional and averaged near-user paths.
OutageValue near_outage_2d(const EffectiveChannel& near, const PairConfig& pair,
                           double theta_kt, double theta_k,
                           const Transform1D& interference, const Inversion2DConfig& cfg,
                           const Inversion1DConfig& cfg1d)
{
    if (!pair.rate_split_feasible()) {
        return certain_outage(true);
    }
    const bool sic_free = pair.R_kt <= 0.0;
    const bool own_free = pair.R_k <= 0.0;
    if (sic_free && own_free) {
        return no_outage();
    }
    if ((!sic_free && theta_kt <= sic_floor(near, pair)) || (!own_free && theta_k <= 0.0)) {
        return certain_outage(false);
    }
    if (sic_free) {
        const CVector nu2 = scaled_served_entry(near, 0.0);
        return from_success(
            success_probability_1d(nu2, near.delta, near.Psi, theta_k, interference, cfg1d));
    }
    if (own_free) {
        const CVector nu1 = scaled_served_entry(near, pair.beta_k2);
        return from_success(success_probability_1d(nu1, near.delta, near.Psi,
                                                   theta_kt - sic_floor(near, pair), interference,
                                                   cfg1d));
    }
    const JointKernel kernel = joint_kernel(near, pair);
    SumMemo memo(interference);
    auto F = [&](cplx s, cplx t) { return kernel(s, t) * memo(s + t) / (s * t); };
    const Inversion2DResult res = invert_2d(F, theta_kt, theta_k, cfg);
    return from_success(res.value, res.degraded);
}

} // namespace

const char* method_name(OutageMethod method)
{
    switch (method) {
    case OutageMethod::ExactConditional:
        return "exact";
    case OutageMethod::ExactAverage:
        return "exact_average";
    case OutageMethod::Approximate:
        return "approx";
    case OutageMethod::MonteCarlo:
        return "mc";
    }
    return "unknown";
}

EffectiveChannel effective_channel(const ChannelEstimate& est, const CMatrix& V, const CVector& u,
                                   int index, const NetworkParams& params)
{
    est.validate();
    if (V.rows() != est.tx() || u.size() != est.rx()) {
        throw std::invalid_argument("precoder or filter dimension mismatch");
    }
    if (index < 0 || index >= V.cols()) {
        throw std::invalid_argument("served stream index out of range");
    }
    EffectiveChannel eff;
    eff.index = index;
    eff.mu = (u.adjoint() * est.H_hat * V).transpose();
    const double rx_gain = u.dot(est.R_r * u).real();
    eff.Sigma = est.sigma_h2 * rx_gain * (V.adjoint() * est.R_t * V).transpose();
    // Force exact Hermitian symmetry before the eigensolver.
    eff.Sigma = 0.5 * (eff.Sigma + eff.Sigma.adjoint()).eval();

    Eigen::SelfAdjointEigenSolver<CMatrix> eig(eff.Sigma);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition of the error covariance failed");
    }
    const Eigen::Index n = eff.Sigma.rows();
    eff.delta.resize(n);
    eff.Psi.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        eff.delta(i) = std::max(0.0, eig.eigenvalues()(n - 1 - i));
        eff.Psi.col(i) = eig.eigenvectors().col(n - 1 - i);
    }
    eff.omega = interference_coefficient(u, params);
    eff.sigma_u2 = params.sigma2 * u.squaredNorm();
    return eff;
}

Transform1D interference_transform(const NetworkParams& params, double omega, double distance)
{
    const double scale = std::numbers::pi * params.lambda_b * omega * distance * distance;
    const double power = 2.0 / params.alpha;
    if (scale == 0.0) {
        return [](cplx) { return cplx(1.0, 0.0); };
    }
    return [scale, power](cplx s) { return std::exp(-scale * std::pow(s, power)); };
}

CVector scaled_served_entry(const EffectiveChannel& eff, double factor)
{
    CVector nu = eff.mu;
    nu(eff.index) *= factor;
    return nu;
}

OutageThresholds outage_thresholds(const EffectiveChannel& far, const EffectiveChannel& near,
                                   const PairConfig& pair, const NetworkParams& params)
{
    OutageThresholds th;
    const double far_gain = std::norm(far.mu(far.index));
    const double near_gain = std::norm(near.mu(near.index));
    const double far_noise = far.sigma_u2 / (params.P * params.path_loss(pair.d_kt));
    const double near_noise = near.sigma_u2 / (params.P * params.path_loss(pair.d_k));

    th.tau_kt_bar = (1.0 / sinr_target(pair.R_kt) - pair.beta_k2) * pair.beta_kt2() * far_gain;
    th.theta_k_bar = near_gain * pair.beta_k2 / sinr_target(pair.R_k);
    th.theta_kt_bar = near_gain * pair.beta_kt2() / sinr_target(pair.R_kt);
    th.tau_kt = th.tau_kt_bar - far_noise;
    th.theta_k = th.theta_k_bar - near_noise;
    th.theta_kt = th.theta_kt_bar - near_noise;
    return th;
}

double success_probability_1d(const CVector& nu, const RVector& delta, const CMatrix& Psi,
                              double threshold, const Transform1D& interference,
                              const Inversion1DConfig& cfg)
{
    if (!(threshold > 0.0)) {
        return 0.0;
    }
    if (std::isinf(threshold)) {
        return 1.0;
    }
    const CVector zeta = Psi.adjoint() * nu;
    if (delta.size() == 0 || delta.maxCoeff() == 0.0) {
        // Deterministic quadratic form: shift the threshold, invert only the interference.
        const double rest = threshold - zeta.squaredNorm();
        if (!(rest > 0.0)) {
            return 0.0;
        }
        // E exp(-I) == 1 only for I == 0.
        if (interference(cplx(1.0, 0.0)) == cplx(1.0, 0.0)) {
            return 1.0;
        }
        return invert_1d([&](cplx s) { return interference(s) / s; }, rest, cfg);
    }
    QuadraticForm q{zeta.cwiseAbs2(), delta};
    double shift = 0.0;
    Inversion1DConfig used = cfg;
    const double spread = q.spread();
    if (threshold > 5.0 * spread && 50.0 * delta.maxCoeff() <= threshold) {
        // Nearly a step: the plain series rings. Settle the far tails by Chernoff bounds,
        // otherwise invert Q - shift over a window comparable to the spread. Every
        // eigenvalue must be small, else the shifted terms decay too slowly to sum.
        if (log_lower_tail(q, interference, threshold) < kNegligibleLog) {
            return 0.0;
        }
        const bool quiet = interference(cplx(1.0, 0.0)) == cplx(1.0, 0.0);
        if (quiet && log_upper_tail(q, threshold) < kNegligibleLog) {
            return 1.0;
        }
        double lo = 0.0;
        double hi = std::min(threshold, q.mean());
        if (hi <= threshold / 2.0) {
            lo = hi;
        } else {
            lo = threshold / 2.0;
            for (int i = 0; i < 40 && hi - lo > 1e-3 * spread; ++i) {
                const double mid = 0.5 * (lo + hi);
                (shift_is_safe(q, interference, threshold, mid, cfg.A) ? lo : hi) = mid;
            }
        }
        shift = lo;
        const double window = threshold - shift;
        used.truncation = static_cast<int>(
            std::clamp(std::ceil(4.0 * window / spread), double(cfg.truncation), 5000.0));
    }
    auto F = [&](cplx s) {
        cplx exponent = s * shift;
        cplx denom(1.0, 0.0);
        for (Eigen::Index i = 0; i < zeta.size(); ++i) {
            const cplx d = 1.0 + s * delta(i);
            exponent -= s * std::norm(zeta(i)) / d;
            denom *= d;
        }
        return std::exp(exponent) * interference(s) / (s * denom);
    };
    return invert_1d(F, threshold - shift, used);
}

OutageValue far_outage_conditional(const EffectiveChannel& far, const PairConfig& pair,
                                   const NetworkParams& params, const Inversion1DConfig& cfg)
{
    if (pair.R_kt <= 0.0) {
        return no_outage();
    }
    if (!pair.rate_split_feasible()) {
        return certain_outage(true);
    }
    const OutageThresholds th = outage_thresholds(far, far, pair, params);
    if (th.tau_kt <= 0.0) {
        return certain_outage(false);
    }
    const CVector nu = scaled_served_entry(far, pair.beta_k2);
    return from_success(success_probability_1d(nu, far.delta, far.Psi, th.tau_kt,
                                               interference_transform(params, far.omega, pair.d_kt),
                                               cfg));
}

OutageValue far_outage_average(const EffectiveChannel& far, const PairConfig& pair,
                               const NetworkParams& params, const DistanceLaw& law,
                               const Inversion1DConfig& cfg, FunctionalMethod method)
{
    if (pair.R_kt <= 0.0) {
        return no_outage();
    }
    if (!pair.rate_split_feasible()) {
        return certain_outage(true);
    }
    const OutageThresholds th = outage_thresholds(far, far, pair, params);
    if (th.tau_kt_bar <= 0.0) {
        return certain_outage(false);
    }
    const DistanceFunctional phi(params, law, far.omega, far.sigma_u2 / params.P, method);
    const CVector nu = scaled_served_entry(far, pair.beta_k2);
    return from_success(success_probability_1d(nu, far.delta, far.Psi, th.tau_kt_bar,
                                               [&](cplx s) { return phi(s); }, cfg));
}

OutageValue far_outage_average(const EffectiveChannel& far, const PairConfig& pair,
                               const NetworkParams& params, GroupingPolicy policy,
                               const Inversion1DConfig& cfg, FunctionalMethod method)
{
    return far_outage_average(far, pair, params, far_distance_law(policy, pair, params.K), cfg,
                              method);
}

OutageValue near_outage_conditional_exact(const EffectiveChannel& near, const PairConfig& pair,
                                          const NetworkParams& params,
                                          const Inversion2DConfig& cfg)
{
    const OutageThresholds th = outage_thresholds(near, near, pair, params);
    return near_outage_2d(near, pair, th.theta_kt, th.theta_k,
                          interference_transform(params, near.omega, pair.d_k), cfg, {});
}

OutageValue near_outage_conditional_approx(const EffectiveChannel& near, const PairConfig& pair,
                                           const NetworkParams& params,
                                           const Inversion1DConfig& cfg)
{
    if (!pair.rate_split_feasible()) {
        return certain_outage(true);
    }
    const OutageThresholds th = outage_thresholds(near, near, pair, params);
    const Transform1D interference = interference_transform(params, near.omega, pair.d_k);
    double q_sic = 1.0;
    if (pair.R_kt > 0.0) {
        const CVector nu1 = scaled_served_entry(near, pair.beta_k2);
        q_sic = success_probability_1d(nu1, near.delta, near.Psi,
                                       th.theta_kt - sic_floor(near, pair), interference, cfg);
    }
    double q_own = 1.0;
    if (pair.R_k > 0.0) {
        const CVector nu2 = scaled_served_entry(near, 0.0);
        q_own = success_probability_1d(nu2, near.delta, near.Psi, th.theta_k, interference, cfg);
    }
    return from_success(q_sic * q_own);
}

OutageValue near_outage_average(const EffectiveChannel& near, const PairConfig& pair,
                                const NetworkParams& params, const DistanceLaw& law,
                                const Inversion2DConfig& cfg, FunctionalMethod method)
{
    const OutageThresholds th = outage_thresholds(near, near, pair, params);
    const DistanceFunctional phi(params, law, near.omega, near.sigma_u2 / params.P, method);
    return near_outage_2d(near, pair, th.theta_kt_bar, th.theta_k_bar,
                          [&](cplx s) { return phi(s); }, cfg, {});
}

OutageValue near_outage_average(const EffectiveChannel& near, const PairConfig& pair,
                                const NetworkParams& params, GroupingPolicy policy,
                                const Inversion2DConfig& cfg, FunctionalMethod method)
{
    return near_outage_average(near, pair, params, near_distance_law(policy, pair, params.K), cfg,
                               method);
}

} // namespace noma

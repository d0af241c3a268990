#include "noma/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace noma {

namespace {

double binomial(int n, int k)
{
    double out = 1.0;
    for (int i = 1; i <= k; ++i) {
        out = out * (n - k + i) / i;
    }
    return out;
}

double rayleigh_rate(const NetworkParams& params)
{
    return params.c * params.lambda_b * std::numbers::pi;
}

void check_order(int order, int total)
{
    if (total < 1 || order < 1 || order > total) {
        throw std::invalid_argument("order statistic requires 1 <= r <= total");
    }
}

// -ln(1e-16): integrands are cut where the envelope falls below 1e-16.
constexpr double kEnvelopeCut = 36.84;

} // namespace

double serving_distance_pdf(double x, const NetworkParams& params)
{
    if (x < 0.0) {
        return 0.0;
    }
    const double a = rayleigh_rate(params);
    return 2.0 * a * x * std::exp(-a * x * x);
}

double serving_distance_cdf(double x, const NetworkParams& params)
{
    if (x <= 0.0) {
        return 0.0;
    }
    return -std::expm1(-rayleigh_rate(params) * x * x);
}

double ordered_distance_pdf(double x, int order, int total, const NetworkParams& params)
{
    check_order(order, total);
    if (x < 0.0) {
        return 0.0;
    }
    const double F = serving_distance_cdf(x, params);
    return order * binomial(total, order) * std::pow(F, order - 1) *
           std::pow(1.0 - F, total - order) * serving_distance_pdf(x, params);
}

double ordered_distance_cdf(double x, int order, int total, const NetworkParams& params)
{
    check_order(order, total);
    const double F = serving_distance_cdf(x, params);
    double sum = 0.0;
    for (int j = order; j <= total; ++j) {
        sum += binomial(total, j) * std::pow(F, j) * std::pow(1.0 - F, total - j);
    }
    return std::clamp(sum, 0.0, 1.0);
}

double sample_serving_distance(const NetworkParams& params, Rng& rng)
{
    if (!(params.lambda_b > 0.0)) {
        throw std::invalid_argument("serving distance needs lambda_b > 0");
    }
    // d^2 is exponential with rate c lambda_b pi.
    std::exponential_distribution<double> squared(rayleigh_rate(params));
    return std::sqrt(squared(rng));
}

std::vector<PolarPoint> sample_ppp_points(const NetworkParams& params, double exclusion_radius,
                                          double window_radius, Rng& rng)
{
    if (!(exclusion_radius >= 0.0) || !(window_radius > exclusion_radius)) {
        throw std::invalid_argument("window radius must exceed the exclusion radius");
    }
    std::vector<PolarPoint> out;
    if (params.lambda_b <= 0.0) {
        return out;
    }
    // Squared radii of a planar PPP form a 1D PPP of intensity lambda_b pi.
    std::exponential_distribution<double> gap(params.lambda_b * std::numbers::pi);
    std::uniform_real_distribution<double> turn(0.0, 2.0 * std::numbers::pi);
    const double outer = window_radius * window_radius;
    double r2 = exclusion_radius * exclusion_radius;
    while (true) {
        r2 += gap(rng);
        if (r2 > outer) {
            break;
        }
        const double angle = turn(rng);
        out.push_back({std::sqrt(r2), angle});
    }
    return out;
}

std::vector<double> sample_ppp_interferers(const NetworkParams& params, double exclusion_radius,
                                           double window_radius, Rng& rng)
{
    const std::vector<PolarPoint> points =
        sample_ppp_points(params, exclusion_radius, window_radius, rng);
    std::vector<double> out;
    out.reserve(points.size());
    for (const PolarPoint& p : points) {
        out.push_back(p.radius);
    }
    return out;
}

double interference_coefficient_from_gain(double filter_gain, const NetworkParams& params)
{
    if (!(params.alpha > 2.0)) {
        throw std::invalid_argument("alpha must exceed 2");
    }
    if (filter_gain < 0.0) {
        throw std::invalid_argument("filter gain must be nonnegative");
    }
    const double delta = 2.0 / params.alpha;
    return std::tgamma(1.0 - delta) * std::pow(params.rho_I / params.P * filter_gain, delta);
}

double interference_coefficient(const CVector& u, const NetworkParams& params)
{
    return interference_coefficient_from_gain(std::norm(u.sum()), params);
}

DistanceLaw far_distance_law(GroupingPolicy policy, const PairConfig& pair, int K)
{
    if (policy == GroupingPolicy::Random) {
        return OrderStatistic{2, 2};
    }
    return OrderStatistic{pair.r_kt, 2 * K};
}

DistanceLaw near_distance_law(GroupingPolicy policy, const PairConfig& pair, int K)
{
    if (policy == GroupingPolicy::Random) {
        return OrderStatistic{1, 2};
    }
    return OrderStatistic{pair.r_k, 2 * K};
}

DistanceFunctional::DistanceFunctional(const NetworkParams& params, DistanceLaw law, double omega,
                                       double noise_ratio, FunctionalMethod method)
    : params_(params), law_(law), omega_(omega), noise_ratio_(noise_ratio)
{
    if (!(params.alpha > 2.0)) {
        throw std::invalid_argument("alpha must exceed 2");
    }
    if (omega < 0.0 || noise_ratio < 0.0) {
        throw std::invalid_argument("omega and noise ratio must be nonnegative");
    }
    if (const auto* os = std::get_if<OrderStatistic>(&law_)) {
        check_order(os->order, os->total);
        if (!(params.lambda_b > 0.0)) {
            throw std::invalid_argument("distance averaging needs lambda_b > 0");
        }
        const double typical = std::pow(1.0 / rayleigh_rate(params), params.alpha / 2.0);
        switch (method) {
        case FunctionalMethod::InterferenceLimited:
            closed_form_ = true;
            break;
        case FunctionalMethod::Quadrature:
            closed_form_ = false;
            break;
        case FunctionalMethod::Auto:
            closed_form_ = noise_ratio * typical < interference_limited_ratio;
            break;
        }
    } else if (std::get<PointMass>(law_).distance <= 0.0) {
        throw std::invalid_argument("point-mass distance must be positive");
    }
}

cplx DistanceFunctional::operator()(cplx s) const
{
    if (s == cplx(0.0, 0.0)) {
        return 1.0;
    }
    if (const auto* pm = std::get_if<PointMass>(&law_)) {
        const double d = pm->distance;
        const cplx exponent = -noise_ratio_ * s * std::pow(d, params_.alpha) -
                              std::numbers::pi * params_.lambda_b * omega_ * d * d *
                                  std::pow(s, 2.0 / params_.alpha);
        return std::exp(exponent);
    }
    return order_statistic(s, std::get<OrderStatistic>(law_));
}

cplx DistanceFunctional::order_statistic(cplx s, const OrderStatistic& law) const
{
    const double c = params_.c;
    const double a = rayleigh_rate(params_);
    const double half_alpha = params_.alpha / 2.0;
    const cplx spread = omega_ * std::pow(s, 2.0 / params_.alpha) / c;
    const int r = law.order;
    const int n = law.total;

    // With t = c lambda_b pi d^2 each binomial term is
    // int_0^inf exp(-noise s (t/a)^{alpha/2} - (spread + m) t) dt.
    cplx sum{};
    for (int l = 0; l < r; ++l) {
        const double weight = ((l % 2 == 0) ? 1.0 : -1.0) * binomial(r - 1, l);
        const cplx rate = spread + static_cast<double>(n - r + l + 1);
        cplx term;
        if (closed_form_) {
            term = 1.0 / rate;
        } else {
            const cplx noise = noise_ratio_ * s * std::pow(a, -half_alpha);
            double upper = kEnvelopeCut / rate.real();
            if (noise.real() > 0.0) {
                upper = std::min(upper, std::pow(kEnvelopeCut / noise.real(), 1.0 / half_alpha));
            }
            auto integrand = [&](double t) {
                return std::exp(-noise * std::pow(t, half_alpha) - rate * t);
            };
            double error = 0.0;
            term = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                integrand, 0.0, upper, 15, 1e-12, &error);
            if (!std::isfinite(term.real()) || !std::isfinite(term.imag())) {
                throw NumericalError("distance functional quadrature failed");
            }
        }
        sum += weight * term;
    }
    return static_cast<double>(r) * binomial(n, r) * sum;
}

} // namespace noma

#pragma once

#include <variant>
#include <vector>

#include "noma/common.hpp"
#include "noma/model.hpp"

namespace noma {

/// Rayleigh-approximated distance from a user to its serving BS.
double serving_distance_pdf(double x, const NetworkParams& params);
double serving_distance_cdf(double x, const NetworkParams& params);

/// Density of the r-th smallest of `total` i.i.d. serving distances.
double ordered_distance_pdf(double x, int order, int total, const NetworkParams& params);
double ordered_distance_cdf(double x, int order, int total, const NetworkParams& params);

double sample_serving_distance(const NetworkParams& params, Rng& rng);

struct PolarPoint {
    double radius = 0.0;
    double angle = 0.0;
};

/// PPP of intensity lambda_b on the annulus exclusion_radius < r <= window_radius, generated
/// outward in radius so that a larger window extends the same realization.
std::vector<PolarPoint> sample_ppp_points(const NetworkParams& params, double exclusion_radius,
                                          double window_radius, Rng& rng);

/// Distances (to the origin) of a PPP of intensity lambda_b restricted to the annulus
/// exclusion_radius < r <= window_radius, in increasing order.
std::vector<double> sample_ppp_interferers(const NetworkParams& params, double exclusion_radius,
                                           double window_radius, Rng& rng);

/// Gamma(1 - 2/alpha) ((rho_I / P) |u^H 1|^2)^{2/alpha}.
double interference_coefficient(const CVector& u, const NetworkParams& params);
double interference_coefficient_from_gain(double filter_gain, const NetworkParams& params);

enum class GroupingPolicy { Random, DistanceBased };

struct OrderStatistic {
    int order = 1;
    int total = 1;
};

struct PointMass {
    double distance = 0.0;
};

using DistanceLaw = std::variant<OrderStatistic, PointMass>;

/// Law of the far (near) user's distance under a grouping policy. Random grouping
/// is the max (min) of two serving distances; distance-based grouping uses the
/// pair's ranks out of 2K.
DistanceLaw far_distance_law(GroupingPolicy policy, const PairConfig& pair, int K);
DistanceLaw near_distance_law(GroupingPolicy policy, const PairConfig& pair, int K);

enum class FunctionalMethod { Auto, Quadrature, InterferenceLimited };

/// E_d[exp(-noise_ratio * s * d^alpha - pi lambda_b omega d^2 s^{2/alpha})] over a
/// distance law, for complex s with Re(s) > 0. noise_ratio is the filtered noise
/// power over P.
class DistanceFunctional {
public:
    DistanceFunctional(const NetworkParams& params, DistanceLaw law, double omega,
                       double noise_ratio, FunctionalMethod method = FunctionalMethod::Auto);

    cplx operator()(cplx s) const;

    bool closed_form() const { return closed_form_; }

    /// Auto switches to the closed form when noise_ratio * E[d^2]^{alpha/2} is below this.
    static constexpr double interference_limited_ratio = 1e-12;

private:
    cplx order_statistic(cplx s, const OrderStatistic& law) const;

    NetworkParams params_;
    DistanceLaw law_;
    double omega_;
    double noise_ratio_;
    bool closed_form_ = false;
};

} // namespace noma

#include <doctest.h>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fixture.hpp"
#include "noma/asymptotic.hpp"

using namespace noma;
using fixture::table_one;
using fixture::z_score;

namespace {

CMatrix random_unit_columns(int rows, int cols, Rng& rng)
{
    CMatrix V(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) {
            V(i, j) = sample_cscg(rng, 1.0);
        }
        V.col(j).normalize();
    }
    return V;
}

const Transform1D no_interference = [](cplx) { return cplx(1.0, 0.0); };

} // namespace

TEST_CASE("effective channel construction")
{
    Rng rng(31);
    NetworkParams params;
    ChannelEstimate est = make_channel_estimate(sample_known_channel(2, 3, rng), 0.9, 20.0);
    const CMatrix V = random_unit_columns(3, 2, rng);
    CVector u(2);
    u << sample_cscg(rng, 1.0), sample_cscg(rng, 1.0);

    const EffectiveChannel eff = effective_channel(est, V, u, 1, params);
    for (int i = 0; i < 2; ++i) {
        const cplx direct = (u.adjoint() * est.H_hat * V.col(i))(0, 0);
        CHECK(std::abs(eff.mu(i) - direct) < 1e-14);
    }
    CHECK((eff.Psi * eff.delta.asDiagonal() * eff.Psi.adjoint() - eff.Sigma).norm() < 1e-10);
    CHECK(eff.delta.minCoeff() >= 0.0);
    CHECK(eff.delta(0) >= eff.delta(1));
    const double trace = est.sigma_h2 * (u.adjoint() * est.R_r * u)(0, 0).real() *
                         (V.adjoint() * est.R_t * V).trace().real();
    CHECK(eff.Sigma.trace().real() == doctest::Approx(trace).epsilon(1e-10));
    CHECK(eff.omega == doctest::Approx(interference_coefficient(u, params)));
    CHECK(eff.sigma_u2 == doctest::Approx(params.sigma2 * u.squaredNorm()));

    est.sigma_h2 = 0.0;
    const EffectiveChannel exact = effective_channel(est, V, u, 0, params);
    CHECK(exact.Sigma.norm() == 0.0);
    CHECK(exact.delta.norm() == 0.0);

    // Isotropic error with orthonormal precoder columns.
    ChannelEstimate iso = make_channel_estimate(est.H_hat, 0.0, 10.0);
    const CMatrix Q = Eigen::HouseholderQR<CMatrix>(random_unit_columns(3, 3, rng)).householderQ();
    const CMatrix W = Q.leftCols(2);
    const EffectiveChannel white = effective_channel(iso, W, u, 0, params);
    const CMatrix expected = iso.sigma_h2 * u.squaredNorm() * CMatrix::Identity(2, 2);
    CHECK((white.Sigma - expected).norm() < 1e-12);
    CHECK(white.delta(0) == doctest::Approx(white.delta(1)).epsilon(1e-12));

    CHECK_THROWS(effective_channel(est, V, u, 2, params));
}

TEST_CASE("quadratic-form success probability")
{
    // Equal eigenvalues: 2 ||chi + nu||^2 / delta is noncentral chi-square with 4 dof.
    const double delta = 0.2;
    CVector nu(2);
    nu << cplx(0.3, -0.4), cplx(0.1, 0.2);
    const RVector d = RVector::Constant(2, delta);
    const CMatrix I = CMatrix::Identity(2, 2);
    const boost::math::non_central_chi_squared law(4.0, 2.0 * nu.squaredNorm() / delta);
    for (double x : {0.05, 0.3, 1.0, 2.5}) {
        CHECK(std::abs(success_probability_1d(nu, d, I, x, no_interference) -
                       boost::math::cdf(law, 2.0 * x / delta)) < 1e-8);
    }

    // Centred, distinct eigenvalues: hypoexponential law for any unitary basis.
    RVector d2(2);
    d2 << 0.5, 0.1;
    Rng rng(32);
    const CMatrix Psi =
        Eigen::HouseholderQR<CMatrix>(random_unit_columns(2, 2, rng)).householderQ();
    for (double x : {0.05, 0.3, 1.0}) {
        const double expected =
            1.0 - (d2(0) * std::exp(-x / d2(0)) - d2(1) * std::exp(-x / d2(1))) / (d2(0) - d2(1));
        CHECK(std::abs(success_probability_1d(CVector::Zero(2), d2, Psi, x, no_interference) -
                       expected) < 1e-8);
    }

    CHECK(success_probability_1d(nu, d, I, 0.0, no_interference) == 0.0);
    CHECK(success_probability_1d(nu, d, I, -1.0, no_interference) == 0.0);
}

TEST_CASE("sharp quadratic forms")
{
    // Small eigenvalues make the law nearly a step at the mean.
    CVector nu(2);
    nu << cplx(0.6, -0.5), cplx(0.4, 0.3);
    const CMatrix I = CMatrix::Identity(2, 2);
    for (double delta : {1e-3, 1e-5, 1e-7}) {
        const RVector d = RVector::Constant(2, delta);
        const boost::math::non_central_chi_squared law(4.0, 2.0 * nu.squaredNorm() / delta);
        const double mean = nu.squaredNorm() + 2.0 * delta;
        const double spread = std::sqrt(2.0 * delta * delta + 2.0 * delta * nu.squaredNorm());
        for (double z : {-40.0, -3.0, -1.0, 0.0, 0.5, 2.0, 4.0, 40.0}) {
            const double x = mean + z * spread;
            if (x <= 0.0) {
                continue;
            }
            CAPTURE(delta);
            CAPTURE(z);
            CHECK(std::abs(success_probability_1d(nu, d, I, x, no_interference) -
                           boost::math::cdf(law, 2.0 * x / delta)) < 1e-8);
        }
    }

    // With interference: convolve the chi-square density with the interference law alone.
    NetworkParams params;
    params.lambda_b = 1e-7;
    const Transform1D interference = interference_transform(params, 0.5, 125.0);
    const double delta = 1e-4;
    const RVector d = RVector::Constant(2, delta);
    const boost::math::non_central_chi_squared law(4.0, 2.0 * nu.squaredNorm() / delta);
    const double mean = nu.squaredNorm() + 2.0 * delta;
    const double spread = std::sqrt(2.0 * delta * delta + 2.0 * delta * nu.squaredNorm());
    auto interference_cdf = [&](double x) {
        return x > 0.0 ? invert_1d([&](cplx s) { return interference(s) / s; }, x) : 0.0;
    };
    for (double z : {-2.0, 0.0, 3.0, 30.0}) {
        const double x = mean + z * spread;
        const double lo = std::max(0.0, mean - 12.0 * spread);
        const double hi = std::min(x, mean + 12.0 * spread);
        const double expected = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&](double q) {
                return 2.0 / delta * boost::math::pdf(law, 2.0 * q / delta) *
                       interference_cdf(x - q);
            },
            lo, hi, 12, 1e-11);
        CAPTURE(z);
        CHECK(std::abs(success_probability_1d(nu, d, I, x, interference) - expected) < 1e-6);
    }
}

TEST_CASE("thresholds follow their definitions")
{
    const auto t = table_one();
    const PairConfig& pair = t.pairs[0];
    const OutageThresholds th = outage_thresholds(t.effs[0].far, t.effs[0].near, pair, t.params);
    const double gf = std::norm(t.effs[0].far.mu(0));
    const double gn = std::norm(t.effs[0].near.mu(0));
    const double noise_far =
        t.effs[0].far.sigma_u2 / (t.params.P * std::pow(pair.d_kt, -t.params.alpha));
    const double noise_near =
        t.effs[0].near.sigma_u2 / (t.params.P * std::pow(pair.d_k, -t.params.alpha));
    CHECK(th.tau_kt ==
          doctest::Approx((1.0 / (std::exp2(pair.R_kt) - 1.0) - 0.3) * 0.7 * gf - noise_far));
    CHECK(th.theta_k == doctest::Approx(gn * 0.3 / (std::exp2(pair.R_k) - 1.0) - noise_near));
    CHECK(th.theta_kt == doctest::Approx(gn * 0.7 / (std::exp2(pair.R_kt) - 1.0) - noise_near));
    CHECK(th.tau_kt_bar - th.tau_kt == doctest::Approx(noise_far));
}

TEST_CASE("far user without uncertainty or interference never fails")
{
    NetworkParams params;
    params.lambda_b = 0.0;
    params.sigma2 = 0.0;
    params.M = params.N = params.K = 1;
    EffectiveChannel eff;
    eff.mu = CVector::Constant(1, cplx(0.8, 0.6));
    eff.Sigma = CMatrix::Zero(1, 1);
    eff.delta = RVector::Zero(1);
    eff.Psi = CMatrix::Identity(1, 1);
    PairConfig pair;
    pair.beta_k2 = 0.3;
    pair.R_kt = 1.5;
    pair.r_kt = 2;
    // Single stream: the far SINR is beta_kt^2 / beta_k^2 = 7/3, capacity 1.737 bps/Hz.
    const RateThresholds rt = rate_thresholds(eff, eff, pair, params);
    CHECK(rt.R_kt_max_far == doctest::Approx(std::log2(1.0 + 0.7 / 0.3)));
    const OutageValue v = far_outage_conditional(eff, pair, params);
    CHECK(v.p < 1e-7);
    pair.R_kt = 1.8;
    CHECK(far_outage_conditional(eff, pair, params).p > 1.0 - 1e-7);
}

TEST_CASE("far outage edge cases")
{
    auto t = table_one();
    PairConfig pair = t.pairs[0];
    pair.R_kt = 0.0;
    CHECK(far_outage_conditional(t.effs[0].far, pair, t.params).p == 0.0);
    pair.R_kt = 2.5; // 0.3 * (2^2.5 - 1) > 1
    const OutageValue v = far_outage_conditional(t.effs[0].far, pair, t.params);
    CHECK(v.p == 1.0);
    CHECK(v.infeasible);
    CHECK(near_outage_conditional_exact(t.effs[0].near, pair, t.params).infeasible);
    CHECK(near_outage_conditional_approx(t.effs[0].near, pair, t.params).infeasible);
}

TEST_CASE("far outage grows with the far rate")
{
    auto t = table_one();
    double last = -1.0;
    for (double r = 0.1; r <= 2.0; r += 0.1) {
        fixture::set_rates(t, r);
        const OutageValue v = far_outage_conditional(t.effs[0].far, t.pairs[0], t.params);
        CHECK(v.p >= last - 1e-9);
        CHECK(std::abs(v.raw - v.p) < 1e-7);
        last = v.p;
    }
}

TEST_CASE("conditional outage matches Monte Carlo")
{
    auto t = table_one();
    std::vector<RatePoint> rates;
    for (double r : {0.5, 1.0}) {
        rates.push_back({2.0 * r, r});
    }
    McOptions opt;
    opt.trials = 20000;
    opt.seed = 7;
    const auto joint = estimate_outage(t.scenario(), rates, opt);
    opt.decorrelated_stages = true;
    const auto split = estimate_outage(t.scenario(), rates, opt);
    for (std::size_t i = 0; i < rates.size(); ++i) {
        fixture::set_rates(t, rates[i].R_kt);
        const double far = far_outage_conditional(t.effs[0].far, t.pairs[0], t.params).p;
        const double exact = near_outage_conditional_exact(t.effs[0].near, t.pairs[0], t.params).p;
        const double approx =
            near_outage_conditional_approx(t.effs[0].near, t.pairs[0], t.params).p;
        CAPTURE(rates[i].R_kt);
        CHECK(z_score(joint[i].far, far) < 3.0);
        CHECK(z_score(joint[i].near, exact) < 3.0);
        CHECK(z_score(split[i].near, approx) < 3.0);
        CHECK(exact <= approx + 1e-6);
    }
}

TEST_CASE("near user without uncertainty or interference never fails")
{
    NetworkParams params;
    params.lambda_b = 0.0;
    auto t = table_one(0.5, 20.0, 0.9, 2024, params);
    for (auto& ch : t.channels) {
        ch.near.sigma_h2 = 0.0;
        ch.far.sigma_h2 = 0.0;
    }
    t.effs = pair_effective_channels(t.design, t.channels, t.params);
    const RateThresholds rt = rate_thresholds(t.effs[0].far, t.effs[0].near, t.pairs[0], params);
    REQUIRE(t.pairs[0].R_kt < rt.R_kt_max_near);
    REQUIRE(t.pairs[0].R_k < rt.R_k_max_near);
    CHECK(near_outage_conditional_exact(t.effs[0].near, t.pairs[0], params).p < 1e-5);
    CHECK(near_outage_conditional_approx(t.effs[0].near, t.pairs[0], params).p < 1e-7);
}

TEST_CASE("exact near outage never exceeds the independent-stage form")
{
    auto t = table_one();
    for (double r : {0.25, 0.5, 0.75, 1.0, 1.25, 1.5}) {
        fixture::set_rates(t, r);
        const OutageValue exact = near_outage_conditional_exact(t.effs[0].near, t.pairs[0],
                                                                t.params);
        const OutageValue approx = near_outage_conditional_approx(t.effs[0].near, t.pairs[0],
                                                                  t.params);
        CAPTURE(r);
        CHECK(exact.raw <= approx.raw + 1e-5);
        CHECK(exact.raw >= -1e-5);
    }
}

TEST_CASE("interference-limited averages do not depend on the BS density")
{
    NetworkParams params;
    params.sigma2 = 0.0;
    auto t = table_one(0.5, 20.0, 0.9, 2024, params);
    for (GroupingPolicy policy : {GroupingPolicy::Random, GroupingPolicy::DistanceBased}) {
        std::vector<double> far;
        std::vector<double> near;
        for (double lambda : {1e-4, 1e-3}) {
            NetworkParams p = params;
            p.lambda_b = lambda;
            far.push_back(far_outage_average(t.effs[0].far, t.pairs[0], p, policy).p);
            near.push_back(near_outage_average(t.effs[0].near, t.pairs[0], p, policy).p);
        }
        CHECK(std::abs(far[1] - far[0]) <= 1e-6 * far[0]);
        CHECK(std::abs(near[1] - near[0]) <= 1e-6 * near[0]);
    }
}

TEST_CASE("averaged outage equals the conditional outage averaged over distance")
{
    // Far user, random grouping: integrate the point-mass result against the max-of-two law.
    auto t = table_one();
    const PairConfig& pair = t.pairs[0];
    const double avg =
        far_outage_average(t.effs[0].far, pair, t.params, GroupingPolicy::Random).p;
    const auto integrand = [&](double d) {
        return ordered_distance_pdf(d, 2, 2, t.params) *
               far_outage_average(t.effs[0].far, pair, t.params, PointMass{d}).p;
    };
    double sum = 0.0;
    const double h = 2.0;
    for (double d = h / 2; d < 1200.0; d += h) {
        sum += integrand(d) * h;
    }
    CHECK(avg == doctest::Approx(sum).epsilon(1e-4));
}

TEST_CASE("random-grouping average matches Monte Carlo")
{
    auto t = table_one();
    McOptions opt;
    opt.trials = 10000;
    opt.seed = 8;
    opt.mode = McMode::AverageRandom;
    const McOutage mc = estimate_outage(t.scenario(), opt);
    const double far = far_outage_average(t.effs[0].far, t.pairs[0], t.params,
                                          GroupingPolicy::Random).p;
    const double near = near_outage_average(t.effs[0].near, t.pairs[0], t.params,
                                            GroupingPolicy::Random).p;
    CHECK(z_score(mc.far, far) < 3.0);
    CHECK(z_score(mc.near, near) < 3.0);
}

#include <doctest.h>

#include <algorithm>

#include "fixture.hpp"

using namespace noma;
using fixture::table_one;

namespace {

std::vector<PairChannels> random_channels(Rng& rng, const NetworkParams& params)
{
    std::vector<PairChannels> out;
    for (int k = 0; k < params.K; ++k) {
        out.push_back({make_channel_estimate(sample_known_channel(params.N, params.M, rng), 0.9, 20.0),
                       make_channel_estimate(sample_known_channel(params.N, params.M, rng), 0.9, 20.0)});
    }
    return out;
}

double max_alignment_residual(const LinearDesign& d, std::span<const PairChannels> pairs)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        for (Eigen::Index i = 0; i < d.V.cols(); ++i) {
            if (i == static_cast<Eigen::Index>(k)) {
                continue;
            }
            const cplx near = d.u_near[k].dot(pairs[k].near.H_hat * d.V.col(i));
            const cplx far = d.u_far[k].dot(pairs[k].far.H_hat * d.V.col(i));
            worst = std::max({worst, std::abs(near), std::abs(far)});
        }
    }
    return worst;
}

} // namespace

TEST_CASE("alignment null space")
{
    Rng rng(41);
    const NetworkParams params;
    const CMatrix L = antenna_selections(3, 2).front();

    // Identical channels: any (u; u) is aligned.
    const CMatrix H = sample_known_channel(2, 3, rng);
    const NullspaceBasis same = alignment_nullspace(H, H, L);
    CVector u(2);
    u << sample_cscg(rng, 1.0), sample_cscg(rng, 1.0);
    CVector stacked(4);
    stacked << u, u;
    const CVector projected = same.basis * (same.basis.adjoint() * stacked);
    CHECK((projected - stacked).norm() <= 1e-12 * stacked.norm());

    for (int draw = 0; draw < 100; ++draw) {
        const CMatrix A = sample_known_channel(2, 3, rng);
        const CMatrix B = sample_known_channel(2, 3, rng);
        const NullspaceBasis ns = alignment_nullspace(A, B, L);
        CHECK(ns.basis.cols() == 2);
        CHECK_FALSE(ns.rank_deficient);
        CMatrix map(2, 4);
        map << (A * L).adjoint(), -(B * L).adjoint();
        CHECK((map * ns.basis).norm() <= 1e-10);
        CHECK((ns.basis.adjoint() * ns.basis - CMatrix::Identity(2, 2)).norm() <= 1e-12);
    }
    CHECK_THROWS(alignment_nullspace(H, H, CMatrix::Zero(3, 4)));
}

TEST_CASE("antenna selections")
{
    const auto all = antenna_selections(3, 2);
    CHECK(all.size() == 6);
    for (const CMatrix& L : all) {
        CHECK((L.colwise().sum().array() == cplx(1.0, 0.0)).all());
        CHECK((L.rowwise().sum().real().array() <= 1.0).all());
    }
    CHECK(antenna_selections(7, 4).size() == 840);
}

TEST_CASE("signal-alignment precoder over random channels")
{
    Rng rng(42);
    const NetworkParams params;
    for (int draw = 0; draw < 100; ++draw) {
        const auto pairs = random_channels(rng, params);
        const LinearDesign d = build_precoder(pairs, params);
        for (Eigen::Index k = 0; k < d.V.cols(); ++k) {
            CHECK(std::abs(d.V.col(k).norm() - 1.0) <= 1e-12);
        }
        CHECK(max_alignment_residual(d, pairs) <= 1e-10);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const CMatrix near = d.u_near[k].adjoint() * pairs[k].near.H_hat * d.L;
            const CMatrix far = d.u_far[k].adjoint() * pairs[k].far.H_hat * d.L;
            CHECK((near - far).norm() <= 1e-10);
        }
        for (const CMatrix& L : antenna_selections(params.M, params.K)) {
            const SelectionGain g = selection_gain(pairs, L);
            if (!g.singular) {
                CHECK(d.min_gain() >= g.gamma.minCoeff() - 1e-12);
            }
        }
    }
}

TEST_CASE("scalar alignment")
{
    NetworkParams params;
    params.M = params.N = params.K = 1;
    ChannelEstimate near;
    near.H_hat = CMatrix::Constant(1, 1, cplx(0.6, -1.1));
    near.R_t = near.R_r = CMatrix::Identity(1, 1);
    near.sigma_h2 = 0.01;
    ChannelEstimate far = near;
    far.H_hat(0, 0) = cplx(-0.3, 0.4);
    const std::vector<PairChannels> pairs{{near, far}};
    const LinearDesign d = build_precoder(pairs, params);
    CHECK(std::abs(std::abs(d.V(0, 0)) - 1.0) < 1e-12);
    const double a = std::norm(near.H_hat(0, 0));
    const double b = std::norm(far.H_hat(0, 0));
    CHECK(d.gamma(0) == doctest::Approx(a * b / (a + b)).epsilon(1e-12));
}

TEST_CASE("receiver combining")
{
    Rng rng(43);
    const CMatrix L = antenna_selections(3, 1).front();
    // K = 1 leaves a three-dimensional null space.
    const CMatrix A = sample_known_channel(2, 3, rng);
    const CMatrix B = sample_known_channel(2, 3, rng);
    const NullspaceBasis ns = alignment_nullspace(A, B, L);
    REQUIRE(ns.basis.cols() == 3);
    const CMatrix AL = A * L;
    const CVector z = choose_receiver_combining(ns.basis, AL);
    CHECK(z.norm() == doctest::Approx(1.0).epsilon(1e-14));
    auto gain = [&](const CVector& c) {
        return (AL.adjoint() * (ns.basis * c).head(2)).squaredNorm();
    };
    const double chosen = gain(z);
    for (int i = 0; i < 100; ++i) {
        CVector c(3);
        c << sample_cscg(rng, 1.0), sample_cscg(rng, 1.0), sample_cscg(rng, 1.0);
        c.normalize();
        CHECK(chosen >= gain(c) - 1e-12);
    }
    CHECK(gain(std::polar(1.0, 0.7) * z) == doctest::Approx(chosen).epsilon(1e-14));

    const CMatrix one = ns.basis.leftCols(1);
    const CVector forced = choose_receiver_combining(one, AL);
    CHECK(forced.size() == 1);
    CHECK(forced(0) == cplx(1.0, 0.0));
}

TEST_CASE("effective gains are phase invariant")
{
    Rng rng(44);
    CMatrix G(2, 2);
    G << sample_cscg(rng, 1.0), sample_cscg(rng, 1.0), sample_cscg(rng, 1.0),
        sample_cscg(rng, 1.0);
    auto gains = [](const CMatrix& g) {
        const CMatrix inv = g.inverse();
        return RVector((inv * inv.adjoint()).diagonal().real().cwiseInverse());
    };
    CMatrix rotated = G;
    rotated.col(1) *= std::polar(1.0, 1.3);
    CHECK((gains(G) - gains(rotated)).norm() < 1e-12);
}

TEST_CASE("precoder is stable under pair permutation")
{
    auto t = table_one();
    std::vector<PairChannels> swapped{t.channels[1], t.channels[0]};
    const LinearDesign d = build_precoder(swapped, t.params);
    CHECK(d.min_gain() == doctest::Approx(t.design.min_gain()).epsilon(1e-12));
    CHECK((d.V.col(0) - t.design.V.col(1)).norm() < 1e-10);
    CHECK((d.V.col(1) - t.design.V.col(0)).norm() < 1e-10);
}

TEST_CASE("conditional goodput")
{
    auto t = table_one();
    fixture::set_rates(t, 0.0);
    CHECK(conditional_goodput(t.effs, t.pairs, t.params) == 0.0);

    fixture::set_rates(t, 0.5);
    double composed = 0.0;
    for (std::size_t k = 0; k < t.pairs.size(); ++k) {
        const double far = far_outage_conditional(t.effs[k].far, t.pairs[k], t.params).p;
        const double near =
            near_outage_conditional_approx(t.effs[k].near, t.pairs[k], t.params).p;
        composed += t.pairs[k].R_k * (1.0 - near) + t.pairs[k].R_kt * (1.0 - far);
    }
    CHECK(std::abs(conditional_goodput(t.effs, t.pairs, t.params) - composed) <= 1e-12);

    NetworkParams clean;
    clean.lambda_b = 0.0;
    auto c = table_one(0.5, 20.0, 0.9, 2024, clean);
    for (auto& ch : c.channels) {
        ch.near.sigma_h2 *= 1e-6;
        ch.far.sigma_h2 *= 1e-6;
    }
    c.effs = pair_effective_channels(c.design, c.channels, c.params);
    double rates = 0.0;
    for (const PairConfig& p : c.pairs) {
        rates += p.R_k + p.R_kt;
    }
    CHECK(conditional_goodput(c.effs, c.pairs, c.params) == doctest::Approx(rates).epsilon(1e-6));
}

TEST_CASE("rate optimisation")
{
    auto t = table_one();
    const PairOutageModel model = noma_outage_model(t.effs[0], t.pairs[0], t.params);

    // Unconstrained: compare with a dense grid.
    const RateSolution free = optimize_pair_rates(model, 1.0);
    double best = 0.0;
    const double top_k = std::min(model.R_k_limit, 12.0);
    const double top_kt = std::min(model.R_kt_limit, 12.0);
    for (int i = 1; i < 120; ++i) {
        for (int j = 1; j < 120; ++j) {
            const double rk = top_k * i / 120.0;
            const double rkt = top_kt * j / 120.0;
            best = std::max(best, pair_goodput(model, rk, rkt));
        }
    }
    CHECK(free.goodput >= 0.99 * best);

    double last = 0.0;
    for (double eps : {1e-3, 1e-2, 1e-1}) {
        const RateSolution s = optimize_pair_rates(model, eps);
        CHECK(s.goodput >= last - 1e-12);
        last = s.goodput;
        CHECK(model.far(s.R_kt).raw <= eps + 1e-4);
        CHECK(model.near(s.R_k, s.R_kt).raw <= eps + 1e-4);
        PairConfig p = t.pairs[0];
        p.R_kt = s.R_kt;
        CHECK(p.rate_split_feasible());
        CHECK(s.goodput == doctest::Approx(pair_goodput(model, s.R_k, s.R_kt)).epsilon(1e-12));
    }
    CHECK_THROWS(optimize_pair_rates(model, 0.0));

    // A model that is always in outage admits no positive rate.
    PairOutageModel hopeless;
    hopeless.far = [](double) { return OutageValue{0.5, 0.5}; };
    hopeless.near = [](double, double) { return OutageValue{0.5, 0.5}; };
    hopeless.R_k_limit = hopeless.R_kt_limit = 5.0;
    const RateSolution none = optimize_pair_rates(hopeless, 1e-2);
    CHECK(none.infeasible);
    CHECK(none.R_k == 0.0);
    CHECK(none.R_kt == 0.0);
    CHECK(none.goodput == 0.0);
}

TEST_CASE("orthogonal baseline")
{
    auto t = table_one();
    PairEffective same{t.effs[0].near, t.effs[0].near};
    PairConfig half = t.pairs[0];
    half.beta_k2 = 0.5;
    half.d_kt = half.d_k;
    const PairOutageModel oma = oma_outage_model(same, half, t.params);
    // Half the resource at rate R is the full resource at 2R.
    for (double r : {0.25, 0.5, 1.0}) {
        CHECK(oma.near(r, 0.0).p == doctest::Approx(oma.far(r).p).epsilon(1e-14));
        const EffectiveChannel& e = same.near;
        const double noise = e.sigma_u2 / (t.params.P * t.params.path_loss(half.d_k));
        const double threshold = std::norm(e.mu(0)) / (std::exp2(2.0 * r) - 1.0) - noise;
        const double q = success_probability_1d(
            scaled_served_entry(e, 0.0), e.delta, e.Psi, threshold,
            interference_transform(t.params, e.omega, half.d_k));
        CHECK(oma.near(r, 0.0).p == doctest::Approx(1.0 - q).epsilon(1e-12));
    }

    double composed = 0.0;
    for (std::size_t k = 0; k < t.pairs.size(); ++k) {
        composed +=
            optimize_pair_rates(oma_outage_model(t.effs[k], t.pairs[k], t.params), 1e-2).goodput;
    }
    CHECK(std::abs(baseline_goodput(BaselineScheme::OmaPrecoded, t.channels, t.pairs, 1e-2,
                                    t.params) -
                   composed) <= 1e-12);
}

TEST_CASE("proposed scheme dominates the baselines")
{
    auto t = table_one();
    const double proposed = total_goodput(maximize_goodput(t.effs, t.pairs, 1e-2, t.params));
    for (BaselineScheme s :
         {BaselineScheme::OmaPrecoded, BaselineScheme::OmaPlain, BaselineScheme::NomaPlain}) {
        CAPTURE(std::string(scheme_name(s)));
        CHECK(proposed >= baseline_goodput(s, t.channels, t.pairs, 1e-2, t.params));
    }
}

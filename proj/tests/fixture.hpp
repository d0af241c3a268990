#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "noma/design.hpp"
#include "noma/montecarlo.hpp"

namespace fixture {

using namespace noma;

// Default scenario with a pinned known-channel draw and the aligned design.
struct TableOne {
    NetworkParams params;
    std::vector<PairConfig> pairs;
    std::vector<PairChannels> channels;
    LinearDesign design;
    std::vector<PairEffective> effs;

    Scenario scenario(int k = 0) const
    {
        return make_scenario(design, channels, pairs, k, params);
    }
};

inline TableOne table_one(double R_kt = 0.5, double k_factor_db = 20.0, double kappa = 0.9,
                          std::uint64_t channel_seed = 2024,
                          NetworkParams params = NetworkParams{})
{
    TableOne t;
    t.params = params;
    const int K = params.K;
    Rng rng = make_rng(channel_seed, 0);
    for (int k = 0; k < K; ++k) {
        PairConfig p;
        p.R_kt = R_kt;
        p.R_k = 2.0 * R_kt;
        p.r_k = k + 1;
        p.r_kt = 2 * K - k;
        t.pairs.push_back(p);
        const CMatrix H_near = sample_known_channel(params.N, params.M, rng);
        const CMatrix H_far = sample_known_channel(params.N, params.M, rng);
        t.channels.push_back({make_channel_estimate(H_near, kappa, k_factor_db),
                              make_channel_estimate(H_far, kappa, k_factor_db)});
    }
    t.design = build_precoder(t.channels, t.params);
    t.effs = pair_effective_channels(t.design, t.channels, t.params);
    return t;
}

inline void set_rates(TableOne& t, double R_kt)
{
    for (PairConfig& p : t.pairs) {
        p.R_kt = R_kt;
        p.R_k = 2.0 * R_kt;
    }
}

// |estimate - value| in standard errors. With no observed events the binomial
// stderr at the hypothesised value is used.
inline double z_score(const McEstimate& e, double value)
{
    const double diff = std::abs(e.p_hat - value);
    double se = e.stderr;
    if (se == 0.0) {
        se = std::sqrt(value * (1.0 - value) / static_cast<double>(e.n));
    }
    if (se == 0.0) {
        return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return diff / se;
}

} // namespace fixture

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "noma/design.hpp"

namespace noma {

/// Everything needed to simulate one NOMA pair of a typical cell.
struct Scenario {
    NetworkParams params;
    PairChannels channels;
    CMatrix V;
    CVector u_near;
    CVector u_far;
    int index = 0;
    PairConfig pair;
};

Scenario make_scenario(const LinearDesign& design, std::span<const PairChannels> channels,
                       std::span<const PairConfig> pairs, int k, const NetworkParams& params);

/// One realisation of the random quantities entering the SINRs.
struct LinkDraw {
    CMatrix E_near;
    CMatrix E_far;
    double d_k = 0.0;
    double d_kt = 0.0;
    double shot_near = 0.0; ///< sum of l(r) over interferers, seen from the near user
    double shot_far = 0.0;
};

struct SinrTriplet {
    double sic = 0.0;  ///< near user decoding the far user's message
    double near = 0.0; ///< near user after cancellation
    double far = 0.0;
};

SinrTriplet sinr_triplet(const Scenario& scenario, const LinkDraw& draw);

struct TrialOutcome {
    bool success_far = false;
    bool success_sic = false;
    bool success_near = false; ///< joint: SIC and own stage
    SinrTriplet sinr;
};

TrialOutcome classify(const SinrTriplet& sinr, double R_k, double R_kt);

enum class McMode { Conditional, AverageRandom, AverageDistance };

enum class InterfererExclusion { None, ServingDistance };

struct McOptions {
    std::size_t trials = 10000;
    std::uint64_t seed = 1;
    McMode mode = McMode::Conditional;
    bool decorrelated_stages = false; ///< independent draws for the SIC and own stages
    double window_radius = 5000.0;
    InterfererExclusion exclusion = InterfererExclusion::None;
    unsigned workers = 0; ///< 0 -> hardware concurrency
};

struct McEstimate {
    double p_hat = 0.0;
    double stderr = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

McEstimate make_estimate(std::size_t count, std::size_t n, std::uint64_t seed);

struct McOutage {
    McEstimate far;
    McEstimate near; ///< joint near-user outage
    McEstimate sic;  ///< SIC stage alone
    McEstimate own;  ///< own stage alone
};

struct RatePoint {
    double R_k = 0.0;
    double R_kt = 0.0;
};

/// Draws the random quantities of trial `trial`. Deterministic in (seed, trial).
LinkDraw draw_link(const Scenario& scenario, const McOptions& options, std::uint64_t trial,
                   std::uint64_t stage = 0);

/// Outage estimates at several rate points from one shared set of trials.
std::vector<McOutage> estimate_outage(const Scenario& scenario, std::span<const RatePoint> rates,
                                      const McOptions& options);
McOutage estimate_outage(const Scenario& scenario, const McOptions& options);

/// Mean of R_k 1{near success} + R_kt 1{far success}; stderr from the sample variance.
McEstimate estimate_goodput(const Scenario& scenario, const RatePoint& rates,
                            const McOptions& options);

} // namespace noma

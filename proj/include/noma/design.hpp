#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "noma/outage.hpp"

namespace noma {

/// Estimated channels of one NOMA pair (near user k, far user k~).
struct PairChannels {
    ChannelEstimate near;
    ChannelEstimate far;
};

struct NullspaceBasis {
    CMatrix basis;               ///< 2N x (2N - rank), orthonormal columns
    bool rank_deficient = false; ///< rank < K, basis larger than 2N - K
};

/// Null space of the K x 2N map (u; u~) -> (H_near L)^H u - (H_far L)^H u~.
NullspaceBasis alignment_nullspace(const CMatrix& H_near, const CMatrix& H_far, const CMatrix& L);

/// Unit z maximising ||(H_near L)^H U_top z||, U_top being the first N rows of the basis.
/// The phase is fixed so that the first significant entry is real and positive.
CVector choose_receiver_combining(const CMatrix& basis, const CMatrix& H_near_L);

/// All ordered selections of K distinct antennas out of M, as M x K column selectors,
/// in lexicographic order of the antenna indices.
std::vector<CMatrix> antenna_selections(int M, int K);

struct LinearDesign {
    CMatrix V;                 ///< M x K, unit-norm columns
    std::vector<CVector> u_near;
    std::vector<CVector> u_far;
    CMatrix L;                 ///< selected antennas
    CMatrix G;                 ///< K x K, columns g_k
    RVector gamma;             ///< effective gains 1 / (G^{-1} G^{-H})_kk
    int selection = -1;        ///< index of L among the candidates
    bool sampled = false;      ///< candidates were subsampled
    bool rank_deficient = false;

    double min_gain() const { return gamma.minCoeff(); }
};

/// Effective gains of one antenna selection; empty when G is singular.
struct SelectionGain {
    RVector gamma;
    bool singular = false;
};

SelectionGain selection_gain(std::span<const PairChannels> pairs, const CMatrix& L);

struct PrecoderOptions {
    std::size_t exhaustive_limit = 5040;
    std::size_t sampled_candidates = 1000;
    std::uint64_t seed = 1;
};

/// Signal-alignment precoder: picks the antenna selection maximising the smallest
/// effective gain (lowest index on ties) and returns V = L G^{-H} D.
/// Throws NumericalError if every candidate is singular.
LinearDesign build_precoder(std::span<const PairChannels> pairs, const NetworkParams& params,
                            const PrecoderOptions& options = {});

/// Unprecoded reference: first K antennas, matched-filter receivers.
LinearDesign plain_design(std::span<const PairChannels> pairs, const NetworkParams& params);

struct PairEffective {
    EffectiveChannel near;
    EffectiveChannel far;
};

std::vector<PairEffective> pair_effective_channels(const LinearDesign& design,
                                                   std::span<const PairChannels> pairs,
                                                   const NetworkParams& params);

/// Outage of one pair as a function of its two rates. Limits are strict upper bounds.
struct PairOutageModel {
    std::function<OutageValue(double R_k, double R_kt)> near;
    std::function<OutageValue(double R_kt)> far;
    double R_k_limit = std::numeric_limits<double>::infinity();
    double R_kt_limit = std::numeric_limits<double>::infinity();
};

/// NOMA with SIC, near-user outage from the independent-stage form.
PairOutageModel noma_outage_model(const PairEffective& eff, const PairConfig& pair,
                                  const NetworkParams& params, const Inversion1DConfig& cfg = {});

/// Time sharing with fractions beta_k^2 (near) and 1 - beta_k^2 (far), full power per slot.
PairOutageModel oma_outage_model(const PairEffective& eff, const PairConfig& pair,
                                 const NetworkParams& params, const Inversion1DConfig& cfg = {});

double pair_goodput(const PairOutageModel& model, double R_k, double R_kt);

/// Sum over pairs of R_k (1 - p_k) + R_kt (1 - p_kt) with the pairs' configured rates.
double conditional_goodput(std::span<const PairEffective> effs, std::span<const PairConfig> pairs,
                           const NetworkParams& params, const Inversion1DConfig& cfg = {});

struct RateSolution {
    double R_k = 0.0;
    double R_kt = 0.0;
    double goodput = 0.0;
    double p_near = 0.0;
    double p_far = 0.0;
    bool near_binding = false;
    bool far_binding = false;
    bool infeasible = false;
};

struct RateSearchOptions {
    int grid_points = 20;      ///< log-spaced nodes per rate, plus zero
    double min_rate = 1e-3;    ///< lowest nonzero node
    double min_step = 1e-5;    ///< relative precision of the final Brent search
    double binding_tol = 1e-3; ///< relative gap to epsilon reported as binding
};

/// Maximises one pair's goodput subject to raw outages <= epsilon. Nested search:
/// far rate outside, near rate inside, each over its feasible interval.
RateSolution optimize_pair_rates(const PairOutageModel& model, double epsilon,
                                 const RateSearchOptions& options = {});

std::vector<RateSolution> maximize_goodput(std::span<const PairEffective> effs,
                                           std::span<const PairConfig> pairs, double epsilon,
                                           const NetworkParams& params,
                                           const Inversion1DConfig& cfg = {},
                                           const RateSearchOptions& options = {});

enum class BaselineScheme { OmaPrecoded, OmaPlain, NomaPlain };

const char* scheme_name(BaselineScheme scheme);

/// Optimised goodput of a reference scheme, summed over pairs.
double baseline_goodput(BaselineScheme scheme, std::span<const PairChannels> channels,
                        std::span<const PairConfig> pairs, double epsilon,
                        const NetworkParams& params, const Inversion1DConfig& cfg = {},
                        const RateSearchOptions& options = {});

double total_goodput(std::span<const RateSolution> solutions);

} // namespace noma

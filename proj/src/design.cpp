#include "noma/design.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>

namespace noma {

namespace {

constexpr double kRateCap = 64.0;

struct Candidate {
    std::vector<CVector> u_near;
    std::vector<CVector> u_far;
    CMatrix G;
    RVector gamma;
    bool singular = false;
    bool rank_deficient = false;
};

Candidate evaluate_selection(std::span<const PairChannels> pairs, const CMatrix& L)
{
    const auto K = static_cast<Eigen::Index>(pairs.size());
    Candidate cand;
    cand.G.resize(L.cols(), K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const CMatrix near_L = pairs[k].near.H_hat * L;
        const NullspaceBasis ns = alignment_nullspace(pairs[k].near.H_hat, pairs[k].far.H_hat, L);
        cand.rank_deficient = cand.rank_deficient || ns.rank_deficient;
        const CVector z = choose_receiver_combining(ns.basis, near_L);
        const CVector stacked = ns.basis * z;
        const Eigen::Index n = near_L.rows();
        cand.u_near.push_back(stacked.head(n));
        cand.u_far.push_back(stacked.tail(n));
        cand.G.col(k) = near_L.adjoint() * cand.u_near.back();
    }
    Eigen::JacobiSVD<CMatrix> svd(cand.G);
    const RVector sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(sv.size() - 1) > 1e-12 * sv(0))) {
        cand.singular = true;
        return cand;
    }
    const CMatrix Ginv = cand.G.inverse();
    const CMatrix gram = Ginv * Ginv.adjoint();
    cand.gamma.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        cand.gamma(k) = 1.0 / gram(k, k).real();
    }
    return cand;
}

double selection_count(int M, int K)
{
    double count = 1.0;
    for (int i = 0; i < K; ++i) {
        count *= M - i;
    }
    return count;
}

CMatrix selector(int M, std::span<const int> antennas)
{
    CMatrix L = CMatrix::Zero(M, static_cast<Eigen::Index>(antennas.size()));
    for (std::size_t j = 0; j < antennas.size(); ++j) {
        L(antennas[j], static_cast<Eigen::Index>(j)) = 1.0;
    }
    return L;
}

double rate_for_sinr(double sinr) { return std::log2(1.0 + sinr); }

// Largest R with 1/(2^R - 1) > floor, i.e. the far-stage threshold stays positive.
double stage_limit(double floor)
{
    if (!(floor > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return rate_for_sinr(1.0 / floor);
}

std::vector<double> rate_grid(double limit, const RateSearchOptions& options)
{
    std::vector<double> grid{0.0};
    const double top = std::min(limit, kRateCap) * (1.0 - 1e-9);
    if (!(top > 0.0)) {
        return grid;
    }
    const double bottom = std::min(options.min_rate, top / 10.0);
    const int n = std::max(options.grid_points, 2);
    for (int i = 0; i < n; ++i) {
        grid.push_back(bottom * std::pow(top / bottom, static_cast<double>(i) / (n - 1)));
    }
    return grid;
}

} // namespace

NullspaceBasis alignment_nullspace(const CMatrix& H_near, const CMatrix& H_far, const CMatrix& L)
{
    if (H_near.rows() != H_far.rows() || H_near.cols() != L.rows() || H_far.cols() != L.rows()) {
        throw std::invalid_argument("channel and selector dimensions disagree");
    }
    const Eigen::Index N = H_near.rows();
    const Eigen::Index K = L.cols();
    if (K >= 2 * N) {
        throw std::invalid_argument("alignment needs K < 2N");
    }
    CMatrix map(K, 2 * N);
    map << (H_near * L).adjoint(), -(H_far * L).adjoint();
    Eigen::JacobiSVD<CMatrix> svd(map, Eigen::ComputeFullV);
    const RVector sv = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        rank += sv(i) > tol ? 1 : 0;
    }
    NullspaceBasis out;
    out.basis = svd.matrixV().rightCols(2 * N - rank);
    out.rank_deficient = rank < K;
    return out;
}

CVector choose_receiver_combining(const CMatrix& basis, const CMatrix& H_near_L)
{
    const Eigen::Index d = basis.cols();
    if (d == 0) {
        throw std::invalid_argument("empty null-space basis");
    }
    CVector z = CVector::Zero(d);
    if (d == 1) {
        z(0) = 1.0;
        return z;
    }
    const CMatrix gain_map = H_near_L.adjoint() * basis.topRows(H_near_L.rows());
    Eigen::JacobiSVD<CMatrix> svd(gain_map, Eigen::ComputeFullV);
    z = svd.matrixV().col(0);
    const double scale = z.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (std::abs(z(i)) > 1e-12 * scale) {
            z *= std::conj(z(i)) / std::abs(z(i));
            break;
        }
    }
    return z / z.norm();
}

std::vector<CMatrix> antenna_selections(int M, int K)
{
    if (K < 1 || K > M) {
        throw std::invalid_argument("need 1 <= K <= M");
    }
    std::vector<CMatrix> out;
    std::vector<int> pick(K, 0);
    std::vector<bool> used(M, false);
    // Depth-first over positions, lexicographic in the antenna indices.
    auto recurse = [&](auto&& self, int pos) -> void {
        if (pos == K) {
            out.push_back(selector(M, pick));
            return;
        }
        for (int a = 0; a < M; ++a) {
            if (used[a]) {
                continue;
            }
            used[a] = true;
            pick[pos] = a;
            self(self, pos + 1);
            used[a] = false;
        }
    };
    recurse(recurse, 0);
    return out;
}

SelectionGain selection_gain(std::span<const PairChannels> pairs, const CMatrix& L)
{
    const Candidate cand = evaluate_selection(pairs, L);
    return {cand.gamma, cand.singular};
}

LinearDesign build_precoder(std::span<const PairChannels> pairs, const NetworkParams& params,
                            const PrecoderOptions& options)
{
    params.validate();
    const int K = static_cast<int>(pairs.size());
    if (K != params.K) {
        throw std::invalid_argument("number of channel pairs differs from K");
    }
    for (const PairChannels& p : pairs) {
        p.near.validate();
        p.far.validate();
        if (p.near.tx() != params.M || p.near.rx() != params.N || p.far.tx() != params.M ||
            p.far.rx() != params.N) {
            throw std::invalid_argument("channel dimensions differ from N x M");
        }
    }

    std::vector<CMatrix> candidates;
    bool sampled = false;
    if (selection_count(params.M, K) <= static_cast<double>(options.exhaustive_limit)) {
        candidates = antenna_selections(params.M, K);
    } else {
        sampled = true;
        Rng rng = make_rng(options.seed, 0);
        std::vector<int> perm(params.M);
        for (std::size_t c = 0; c < options.sampled_candidates; ++c) {
            std::iota(perm.begin(), perm.end(), 0);
            for (int i = 0; i < K; ++i) {
                std::uniform_int_distribution<int> pick(i, params.M - 1);
                std::swap(perm[i], perm[pick(rng)]);
            }
            candidates.push_back(selector(params.M, std::span<const int>(perm.data(), K)));
        }
    }

    LinearDesign best;
    double best_gain = -1.0;
    Candidate best_cand;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        Candidate cand = evaluate_selection(pairs, candidates[i]);
        if (cand.singular) {
            continue;
        }
        const double gain = cand.gamma.minCoeff();
        if (gain > best_gain) {
            best_gain = gain;
            best.selection = static_cast<int>(i);
            best_cand = std::move(cand);
        }
    }
    if (best.selection < 0) {
        throw NumericalError("every antenna selection gives a singular effective channel");
    }
    best.L = candidates[best.selection];
    best.G = best_cand.G;
    best.gamma = best_cand.gamma;
    best.u_near = best_cand.u_near;
    best.u_far = best_cand.u_far;
    best.sampled = sampled;
    best.rank_deficient = best_cand.rank_deficient;
    const RVector d = best.gamma.cwiseSqrt();
    best.V = best.L * best.G.inverse().adjoint() * d.asDiagonal();
    return best;
}

LinearDesign plain_design(std::span<const PairChannels> pairs, const NetworkParams& params)
{
    params.validate();
    const int K = static_cast<int>(pairs.size());
    LinearDesign out;
    out.L = CMatrix::Identity(params.M, K);
    out.V = out.L;
    out.gamma.resize(K);
    for (int k = 0; k < K; ++k) {
        CVector near = pairs[k].near.H_hat * out.V.col(k);
        CVector far = pairs[k].far.H_hat * out.V.col(k);
        if (near.norm() == 0.0 || far.norm() == 0.0) {
            throw NumericalError("matched filter undefined for a zero channel");
        }
        out.gamma(k) = near.squaredNorm();
        out.u_near.push_back(near / near.norm());
        out.u_far.push_back(far / far.norm());
    }
    return out;
}

std::vector<PairEffective> pair_effective_channels(const LinearDesign& design,
                                                   std::span<const PairChannels> pairs,
                                                   const NetworkParams& params)
{
    std::vector<PairEffective> out;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const int idx = static_cast<int>(k);
        out.push_back({effective_channel(pairs[k].near, design.V, design.u_near[k], idx, params),
                       effective_channel(pairs[k].far, design.V, design.u_far[k], idx, params)});
    }
    return out;
}

PairOutageModel noma_outage_model(const PairEffective& eff, const PairConfig& pair,
                                  const NetworkParams& params, const Inversion1DConfig& cfg)
{
    PairOutageModel model;
    model.near = [eff, pair, params, cfg](double R_k, double R_kt) {
        PairConfig p = pair;
        p.R_k = R_k;
        p.R_kt = R_kt;
        return near_outage_conditional_approx(eff.near, p, params, cfg);
    };
    model.far = [eff, pair, params, cfg](double R_kt) {
        PairConfig p = pair;
        p.R_kt = R_kt;
        return far_outage_conditional(eff.far, p, params, cfg);
    };
    const double b2 = pair.beta_k2;
    const double bt2 = pair.beta_kt2();
    const double far_gain = std::norm(eff.far.mu(eff.far.index));
    const double near_gain = std::norm(eff.near.mu(eff.near.index));
    const double far_noise = eff.far.sigma_u2 / (params.P * params.path_loss(pair.d_kt));
    const double near_noise = eff.near.sigma_u2 / (params.P * params.path_loss(pair.d_k));
    double limit = stage_limit(b2);
    limit = std::min(limit, far_gain > 0.0 ? stage_limit(b2 + far_noise / (bt2 * far_gain)) : 0.0);
    limit = std::min(limit, near_gain > 0.0 ? stage_limit(b2 + near_noise / (bt2 * near_gain)) : 0.0);
    model.R_kt_limit = limit;
    model.R_k_limit = near_noise > 0.0 ? rate_for_sinr(near_gain * b2 / near_noise)
                                       : (near_gain > 0.0 ? kRateCap : 0.0);
    return model;
}

PairOutageModel oma_outage_model(const PairEffective& eff, const PairConfig& pair,
                                 const NetworkParams& params, const Inversion1DConfig& cfg)
{
    const double near_share = pair.beta_k2;
    const double far_share = pair.beta_kt2();
    const double near_noise = eff.near.sigma_u2 / (params.P * params.path_loss(pair.d_k));
    const double far_noise = eff.far.sigma_u2 / (params.P * params.path_loss(pair.d_kt));
    const double near_gain = std::norm(eff.near.mu(eff.near.index));
    const double far_gain = std::norm(eff.far.mu(eff.far.index));

    // Own slot: full power, the other pairs' streams still interfere.
    auto stage = [params, cfg](const EffectiveChannel& e, double rate, double share, double noise,
                               double distance) {
        OutageValue out;
        if (rate <= 0.0) {
            out.p = out.raw = 0.0;
            return out;
        }
        const double gain = std::norm(e.mu(e.index));
        const double threshold = gain / (std::exp2(rate / share) - 1.0) - noise;
        const double q = success_probability_1d(scaled_served_entry(e, 0.0), e.delta, e.Psi,
                                                threshold,
                                                interference_transform(params, e.omega, distance),
                                                cfg);
        out.raw = 1.0 - q;
        out.p = std::clamp(out.raw, 0.0, 1.0);
        return out;
    };
    PairOutageModel model;
    model.near = [eff, pair, stage, near_share, near_noise](double R_k, double) {
        return stage(eff.near, R_k, near_share, near_noise, pair.d_k);
    };
    model.far = [eff, pair, stage, far_share, far_noise](double R_kt) {
        return stage(eff.far, R_kt, far_share, far_noise, pair.d_kt);
    };
    auto limit = [](double share, double gain, double noise) {
        if (gain <= 0.0) {
            return 0.0;
        }
        return noise > 0.0 ? share * rate_for_sinr(gain / noise) : kRateCap;
    };
    model.R_k_limit = limit(near_share, near_gain, near_noise);
    model.R_kt_limit = limit(far_share, far_gain, far_noise);
    return model;
}

double pair_goodput(const PairOutageModel& model, double R_k, double R_kt)
{
    const double far = R_kt > 0.0 ? model.far(R_kt).p : 0.0;
    const double near = R_k > 0.0 || R_kt > 0.0 ? model.near(R_k, R_kt).p : 0.0;
    return R_k * (1.0 - near) + R_kt * (1.0 - far);
}

double conditional_goodput(std::span<const PairEffective> effs, std::span<const PairConfig> pairs,
                           const NetworkParams& params, const Inversion1DConfig& cfg)
{
    if (effs.size() != pairs.size()) {
        throw std::invalid_argument("one pair configuration per effective channel pair");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < effs.size(); ++k) {
        total += pair_goodput(noma_outage_model(effs[k], pairs[k], params, cfg), pairs[k].R_k,
                              pairs[k].R_kt);
    }
    return total;
}

namespace {

// Largest rate below top whose outage stays within epsilon. Outage is nondecreasing in the rate.
template <class Outage>
double feasible_edge(Outage outage, double top, double epsilon)
{
    top = std::min(top, kRateCap) * (1.0 - 1e-9);
    if (!(top > 0.0)) {
        return 0.0;
    }
    const auto ok = [&](double r) {
        const OutageValue v = outage(r);
        return !v.infeasible && v.raw <= epsilon;
    };
    if (ok(top)) {
        return top;
    }
    double lo = 0.0;
    double hi = top;
    for (int i = 0; i < 60 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

struct Peak {
    double rate = 0.0;
    double value = 0.0;
};

// Maximises value(rate) over [0, edge]: log grid, then Brent around the best node.
template <class Value>
Peak maximize_on(Value value, double edge, const RateSearchOptions& options)
{
    Peak best{0.0, value(0.0)};
    if (!(edge > 0.0)) {
        return best;
    }
    const std::vector<double> grid = rate_grid(edge * (1.0 + 1e-9), options);
    std::size_t at = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double v = value(grid[i]);
        if (v > best.value) {
            best = {grid[i], v};
            at = i;
        }
    }
    const double a = at > 0 ? grid[at - 1] : 0.0;
    const double b = at + 1 < grid.size() ? grid[at + 1] : grid[at];
    const int bits = static_cast<int>(std::ceil(-std::log2(options.min_step)));
    const auto r = boost::math::tools::brent_find_minima(
        [&](double x) { return -value(x); }, a, b, bits);
    if (-r.second > best.value) {
        best = {r.first, -r.second};
    }
    return best;
}

} // namespace

RateSolution optimize_pair_rates(const PairOutageModel& model, double epsilon,
                                 const RateSearchOptions& options)
{
    if (!(epsilon > 0.0) || !(epsilon <= 1.0)) {
        throw std::invalid_argument("epsilon must lie in (0, 1]");
    }
    // A user with zero rate has nothing to decode and cannot be in outage.
    auto far_at = [&](double R_kt) {
        return R_kt > 0.0 ? model.far(R_kt) : OutageValue{0.0, 0.0};
    };
    auto near_at = [&](double R_k, double R_kt) {
        return R_k > 0.0 ? model.near(R_k, R_kt) : OutageValue{0.0, 0.0};
    };
    auto feasible = [&](const OutageValue& v) { return !v.infeasible && v.raw <= epsilon; };

    // Best near rate for a fixed far rate.
    auto inner = [&](double R_kt) {
        const double edge = feasible_edge([&](double r) { return near_at(r, R_kt); },
                                          model.R_k_limit, epsilon);
        return maximize_on(
            [&](double r) {
                const OutageValue v = near_at(r, R_kt);
                return feasible(v) ? r * (1.0 - v.p) : -1.0;
            },
            edge, options);
    };
    const double far_edge = feasible_edge(far_at, model.R_kt_limit, epsilon);
    const Peak outer = maximize_on(
        [&](double r) {
            const OutageValue v = far_at(r);
            return feasible(v) ? r * (1.0 - v.p) + inner(r).value : -1.0;
        },
        far_edge, options);

    RateSolution sol;
    sol.R_kt = outer.rate;
    sol.R_k = inner(sol.R_kt).rate;
    const OutageValue far = far_at(sol.R_kt);
    const OutageValue near = near_at(sol.R_k, sol.R_kt);
    sol.goodput = sol.R_k * (1.0 - near.p) + sol.R_kt * (1.0 - far.p);
    sol.p_near = near.p;
    sol.p_far = far.p;
    sol.infeasible = sol.R_k == 0.0 && sol.R_kt == 0.0;
    sol.near_binding = sol.R_k > 0.0 && near.raw >= epsilon * (1.0 - options.binding_tol);
    sol.far_binding = sol.R_kt > 0.0 && far.raw >= epsilon * (1.0 - options.binding_tol);
    return sol;
}

std::vector<RateSolution> maximize_goodput(std::span<const PairEffective> effs,
                                           std::span<const PairConfig> pairs, double epsilon,
                                           const NetworkParams& params,
                                           const Inversion1DConfig& cfg,
                                           const RateSearchOptions& options)
{
    if (effs.size() != pairs.size()) {
        throw std::invalid_argument("one pair configuration per effective channel pair");
    }
    std::vector<RateSolution> out;
    for (std::size_t k = 0; k < effs.size(); ++k) {
        out.push_back(
            optimize_pair_rates(noma_outage_model(effs[k], pairs[k], params, cfg), epsilon, options));
    }
    return out;
}

const char* scheme_name(BaselineScheme scheme)
{
    switch (scheme) {
    case BaselineScheme::OmaPrecoded:
        return "oma_precoded";
    case BaselineScheme::OmaPlain:
        return "oma_plain";
    case BaselineScheme::NomaPlain:
        return "noma_plain";
    }
    return "unknown";
}

double baseline_goodput(BaselineScheme scheme, std::span<const PairChannels> channels,
                        std::span<const PairConfig> pairs, double epsilon,
                        const NetworkParams& params, const Inversion1DConfig& cfg,
                        const RateSearchOptions& options)
{
    const LinearDesign design = scheme == BaselineScheme::OmaPrecoded
                                    ? build_precoder(channels, params)
                                    : plain_design(channels, params);
    const std::vector<PairEffective> effs = pair_effective_channels(design, channels, params);
    double total = 0.0;
    for (std::size_t k = 0; k < effs.size(); ++k) {
        const PairOutageModel model = scheme == BaselineScheme::NomaPlain
                                          ? noma_outage_model(effs[k], pairs[k], params, cfg)
                                          : oma_outage_model(effs[k], pairs[k], params, cfg);
        total += optimize_pair_rates(model, epsilon, options).goodput;
    }
    return total;
}

double total_goodput(std::span<const RateSolution> solutions)
{
    double sum = 0.0;
    for (const RateSolution& s : solutions) {
        sum += s.goodput;
    }
    return sum;
}

} // namespace noma

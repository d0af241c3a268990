#include "noma/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace noma {

namespace {

// Substreams of one trial.
constexpr std::uint64_t kPlacementStream = 0;
constexpr std::uint64_t kErrorStream = 1;  // + 2 * stage
constexpr std::uint64_t kPppStream = 2;    // + 2 * stage

struct Samplers {
    ErrorSampler near;
    ErrorSampler far;
};

void draw_distances(const Scenario& sc, const McOptions& options, Rng& rng, double& d_k,
                    double& d_kt)
{
    switch (options.mode) {
    case McMode::Conditional:
        d_k = sc.pair.d_k;
        d_kt = sc.pair.d_kt;
        return;
    case McMode::AverageRandom: {
        const double a = sample_serving_distance(sc.params, rng);
        const double b = sample_serving_distance(sc.params, rng);
        d_k = std::min(a, b);
        d_kt = std::max(a, b);
        return;
    }
    case McMode::AverageDistance: {
        std::vector<double> d(static_cast<std::size_t>(2 * sc.params.K));
        for (double& x : d) {
            x = sample_serving_distance(sc.params, rng);
        }
        std::sort(d.begin(), d.end());
        d_k = d[static_cast<std::size_t>(sc.pair.r_k - 1)];
        d_kt = d[static_cast<std::size_t>(sc.pair.r_kt - 1)];
        return;
    }
    }
}

double shot_noise(const std::vector<PolarPoint>& points, double d, double angle, double alpha,
                  double exclusion)
{
    const double excl2 = exclusion * exclusion;
    double sum = 0.0;
    for (const PolarPoint& p : points) {
        const double dist2 =
            p.radius * p.radius + d * d - 2.0 * p.radius * d * std::cos(p.angle - angle);
        if (dist2 <= excl2 || dist2 <= 0.0) {
            continue;
        }
        sum += std::pow(dist2, -alpha / 2.0);
    }
    return sum;
}

LinkDraw draw_with(const Scenario& sc, const Samplers& samplers, const McOptions& options,
                   std::uint64_t trial, std::uint64_t stage)
{
    const std::uint64_t base = derive_seed(options.seed, trial);
    LinkDraw draw;

    // Placement is shared by all stages of a trial.
    Rng placement(derive_seed(base, kPlacementStream));
    draw_distances(sc, options, placement, draw.d_k, draw.d_kt);
    std::uniform_real_distribution<double> turn(0.0, 2.0 * std::numbers::pi);
    const double angle_near = 0.0;
    const double angle_far = turn(placement);

    Rng errors(derive_seed(base, kErrorStream + 2 * stage));
    draw.E_near = samplers.near(errors);
    draw.E_far = samplers.far(errors);

    if (sc.params.lambda_b > 0.0) {
        Rng ppp(derive_seed(base, kPppStream + 2 * stage));
        const double window = std::max(options.window_radius, 2.0 * draw.d_kt);
        const std::vector<PolarPoint> points = sample_ppp_points(sc.params, 0.0, window, ppp);
        const bool exclude = options.exclusion == InterfererExclusion::ServingDistance;
        draw.shot_near = shot_noise(points, draw.d_k, angle_near, sc.params.alpha,
                                    exclude ? draw.d_k : 0.0);
        draw.shot_far = shot_noise(points, draw.d_kt, angle_far, sc.params.alpha,
                                   exclude ? draw.d_kt : 0.0);
    }
    return draw;
}

struct Counts {
    std::size_t far = 0;
    std::size_t sic = 0;
    std::size_t own = 0;
    std::size_t joint = 0;
    double goodput = 0.0;
    double goodput2 = 0.0;
};

// Gains and impairments of one user, in units of P l(d).
struct UserView {
    RVector gain;       // |u^H (H_hat + E) v_i|^2
    double known = 0.0; // |u^H H_hat v_k|^2
    double error = 0.0; // |u^H E v_k|^2
    double impairment = 0.0;
};

UserView user_view(const NetworkParams& params, const ChannelEstimate& est, const CMatrix& E,
                   const CMatrix& V, const CVector& u, int k, double d, double shot)
{
    UserView view;
    const CVector mu = (u.adjoint() * est.H_hat * V).transpose();
    const CVector chi = (u.adjoint() * E * V).transpose();
    view.gain = (mu + chi).cwiseAbs2();
    view.known = std::norm(mu(k));
    view.error = std::norm(chi(k));
    const double interference = params.rho_I * std::norm(u.sum()) * shot;
    const double noise = params.sigma2 * u.squaredNorm();
    view.impairment = (interference + noise) / (params.P * params.path_loss(d));
    return view;
}

double rate_target(double R) { return std::exp2(R) - 1.0; }

// Trials [begin, end) accumulated at every rate point.
std::vector<Counts> run_block(const Scenario& sc, const Samplers& samplers,
                              std::span<const RatePoint> rates, const McOptions& options,
                              std::uint64_t begin, std::uint64_t end)
{
    std::vector<Counts> counts(rates.size());
    for (std::uint64_t t = begin; t < end; ++t) {
        const LinkDraw first = draw_with(sc, samplers, options, t, 0);
        const SinrTriplet s0 = sinr_triplet(sc, first);
        SinrTriplet s1 = s0;
        if (options.decorrelated_stages) {
            s1 = sinr_triplet(sc, draw_with(sc, samplers, options, t, 1));
        }
        for (std::size_t j = 0; j < rates.size(); ++j) {
            const bool far = s0.far >= rate_target(rates[j].R_kt);
            const bool sic = s0.sic >= rate_target(rates[j].R_kt);
            const bool own = s1.near >= rate_target(rates[j].R_k);
            Counts& c = counts[j];
            c.far += far;
            c.sic += sic;
            c.own += own;
            c.joint += sic && own;
            const double g = (sic && own ? rates[j].R_k : 0.0) + (far ? rates[j].R_kt : 0.0);
            c.goodput += g;
            c.goodput2 += g * g;
        }
    }
    return counts;
}

std::vector<Counts> run_all(const Scenario& sc, std::span<const RatePoint> rates,
                            const McOptions& options)
{
    if (options.trials == 0) {
        throw std::invalid_argument("Monte Carlo needs at least one trial");
    }
    sc.params.validate();
    const Samplers samplers{ErrorSampler(sc.channels.near), ErrorSampler(sc.channels.far)};
    unsigned workers = options.workers ? options.workers : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(std::min<std::size_t>(
                                                     options.trials, 256)));

    // Every block covers a fixed trial range, so totals do not depend on scheduling.
    std::vector<std::vector<Counts>> partial(workers);
    const std::uint64_t n = options.trials;
    auto block = [&](unsigned w) {
        const std::uint64_t begin = n * w / workers;
        const std::uint64_t end = n * (w + 1) / workers;
        partial[w] = run_block(sc, samplers, rates, options, begin, end);
    };
    if (workers == 1) {
        block(0);
    } else {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> failures(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    block(w);
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (const auto& f : failures) {
            if (f) {
                std::rethrow_exception(f);
            }
        }
    }
    std::vector<Counts> total(rates.size());
    for (const auto& part : partial) {
        for (std::size_t j = 0; j < rates.size(); ++j) {
            total[j].far += part[j].far;
            total[j].sic += part[j].sic;
            total[j].own += part[j].own;
            total[j].joint += part[j].joint;
            total[j].goodput += part[j].goodput;
            total[j].goodput2 += part[j].goodput2;
        }
    }
    return total;
}

} // namespace

Scenario make_scenario(const LinearDesign& design, std::span<const PairChannels> channels,
                       std::span<const PairConfig> pairs, int k, const NetworkParams& params)
{
    if (k < 0 || static_cast<std::size_t>(k) >= channels.size() ||
        static_cast<std::size_t>(k) >= pairs.size() ||
        static_cast<std::size_t>(k) >= design.u_near.size()) {
        throw std::invalid_argument("pair index out of range");
    }
    Scenario sc;
    sc.params = params;
    sc.channels = channels[static_cast<std::size_t>(k)];
    sc.V = design.V;
    sc.u_near = design.u_near[static_cast<std::size_t>(k)];
    sc.u_far = design.u_far[static_cast<std::size_t>(k)];
    sc.index = k;
    sc.pair = pairs[static_cast<std::size_t>(k)];
    return sc;
}

SinrTriplet sinr_triplet(const Scenario& sc, const LinkDraw& draw)
{
    const double b2 = sc.pair.beta_k2;
    const double bt2 = sc.pair.beta_kt2();
    const int k = sc.index;
    const UserView near = user_view(sc.params, sc.channels.near, draw.E_near, sc.V, sc.u_near, k,
                                    draw.d_k, draw.shot_near);
    const UserView far = user_view(sc.params, sc.channels.far, draw.E_far, sc.V, sc.u_far, k,
                                   draw.d_kt, draw.shot_far);

    const double near_served = near.gain(k);
    const double near_other = near.gain.sum() - near_served;
    const double far_served = far.gain(k);
    const double far_other = far.gain.sum() - far_served;

    // The receiver knows only H_hat: the error on the served stream is noise.
    SinrTriplet s;
    s.sic = bt2 * near.known /
            (bt2 * near.error + b2 * near_served + near_other + near.impairment);
    s.near = b2 * near.known / (near.error + near_other + near.impairment);
    s.far = bt2 * far.known / (bt2 * far.error + b2 * far_served + far_other + far.impairment);
    return s;
}

TrialOutcome classify(const SinrTriplet& sinr, double R_k, double R_kt)
{
    TrialOutcome out;
    out.sinr = sinr;
    out.success_far = sinr.far >= rate_target(R_kt);
    out.success_sic = sinr.sic >= rate_target(R_kt);
    out.success_near = out.success_sic && sinr.near >= rate_target(R_k);
    return out;
}

McEstimate make_estimate(std::size_t count, std::size_t n, std::uint64_t seed)
{
    if (n == 0 || count > n) {
        throw std::invalid_argument("estimate needs 0 <= count <= n, n > 0");
    }
    McEstimate e;
    e.n = n;
    e.seed = seed;
    e.p_hat = static_cast<double>(count) / static_cast<double>(n);
    e.stderr = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(n));
    return e;
}

LinkDraw draw_link(const Scenario& scenario, const McOptions& options, std::uint64_t trial,
                   std::uint64_t stage)
{
    const Samplers samplers{ErrorSampler(scenario.channels.near),
                            ErrorSampler(scenario.channels.far)};
    return draw_with(scenario, samplers, options, trial, stage);
}

std::vector<McOutage> estimate_outage(const Scenario& scenario, std::span<const RatePoint> rates,
                                      const McOptions& options)
{
    const std::vector<Counts> counts = run_all(scenario, rates, options);
    const std::size_t n = options.trials;
    std::vector<McOutage> out;
    out.reserve(counts.size());
    for (const Counts& c : counts) {
        McOutage o;
        o.far = make_estimate(n - c.far, n, options.seed);
        o.near = make_estimate(n - c.joint, n, options.seed);
        o.sic = make_estimate(n - c.sic, n, options.seed);
        o.own = make_estimate(n - c.own, n, options.seed);
        out.push_back(o);
    }
    return out;
}

McOutage estimate_outage(const Scenario& scenario, const McOptions& options)
{
    const RatePoint rate{scenario.pair.R_k, scenario.pair.R_kt};
    return estimate_outage(scenario, std::span<const RatePoint>(&rate, 1), options).front();
}

McEstimate estimate_goodput(const Scenario& scenario, const RatePoint& rates,
                            const McOptions& options)
{
    const Counts c = run_all(scenario, std::span<const RatePoint>(&rates, 1), options).front();
    const double n = static_cast<double>(options.trials);
    McEstimate e;
    e.n = options.trials;
    e.seed = options.seed;
    e.p_hat = c.goodput / n;
    const double var = n > 1.0 ? std::max(0.0, (c.goodput2 - n * e.p_hat * e.p_hat) / (n - 1.0))
                               : 0.0;
    e.stderr = std::sqrt(var / n);
    return e;
}

} // namespace noma

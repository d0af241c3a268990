#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "noma/cli.hpp"

namespace noma::cli {

namespace {

Check compare(std::string name, double got, double want, double tolerance)
{
    if (std::isnan(got)) {
        return {std::move(name), std::numeric_limits<double>::infinity(), tolerance, false};
    }
    Check c;
    c.name = std::move(name);
    c.error = std::abs(got - want);
    c.tolerance = tolerance;
    c.pass = std::isfinite(got) && c.error <= tolerance;
    return c;
}

std::string label(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

// NaN when the kernel rejects its configuration or fails numerically.
double guarded(const std::function<double()>& f)
{
    try {
        return f();
    } catch (const std::exception&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void kernel_checks(const ValidationOptions& options, std::vector<Check>& out)
{
    Inversion1DConfig c1;
    Inversion2DConfig c2;
    if (options.inversion_A) {
        c1.A = *options.inversion_A;
        c2.A = *options.inversion_A;
    }
    constexpr double tol1 = 1e-7;
    constexpr double tol2 = 1e-5;
    for (double t : {0.5, 1.0, 2.0, 5.0}) {
        const std::string at = " at " + label(t);
        out.push_back(compare("1d 1/s" + at, guarded([&] { return invert_1d([](cplx s) { return 1.0 / s; }, t, c1); }),
                              1.0, tol1));
        out.push_back(compare("1d 1/(s(s+1))" + at,
                              guarded([&] { return invert_1d([](cplx s) { return 1.0 / (s * (s + 1.0)); }, t, c1); }),
                              -std::expm1(-t), tol1));
        out.push_back(compare("1d exp(-sqrt s)/s" + at,
                              guarded([&] {
                                  return invert_1d(
                                      [](cplx s) { return std::exp(-std::sqrt(s)) / s; }, t, c1);
                              }),
                              std::erfc(0.5 / std::sqrt(t)), tol1));
    }
    const double pts[][2] = {{1.0, 2.0}, {1.0, 0.5}, {2.0, 0.7}, {0.3, 3.0}};
    for (const auto& p : pts) {
        const double x = p[0];
        const double y = p[1];
        const std::string at = " at (" + label(x) + "," + label(y) + ")";
        out.push_back(compare("2d 1/(st)" + at,
                              guarded([&] {
                                  return invert_2d([](cplx s, cplx t) { return 1.0 / (s * t); }, x,
                                                   y, c2)
                                      .value;
                              }),
                              1.0, tol2));
        out.push_back(compare(
            "2d 1/((s+1)(t+2))" + at,
            guarded([&] {
                return invert_2d(
                           [](cplx s, cplx t) { return 1.0 / ((s + 1.0) * (t + 2.0)); }, x, y, c2)
                    .value;
            }),
            std::exp(-x - 2.0 * y), tol2));
        out.push_back(compare(
            "2d 1/(st(1+s+t))" + at,
            guarded([&] {
                return invert_2d(
                           [](cplx s, cplx t) { return 1.0 / (s * t * (1.0 + s + t)); }, x, y, c2)
                    .value;
            }),
            -std::expm1(-std::min(x, y)), tol2));
    }
}

void monte_carlo_checks(const ValidationOptions& options, std::vector<Check>& out)
{
    ExperimentConfig config;
    config.values = {0.5};
    const PointSetup setup = make_point(config, std::nullopt, 0.5);
    const LinearDesign design = build_precoder(setup.channels, setup.params);
    const std::vector<PairEffective> effs =
        pair_effective_channels(design, setup.channels, setup.params);
    const Scenario sc = make_scenario(design, setup.channels, setup.pairs, 0, setup.params);

    McOptions mc;
    mc.trials = options.trials;
    mc.seed = options.seed;
    const McOutage joint = estimate_outage(sc, mc);
    mc.decorrelated_stages = true;
    const McOutage split = estimate_outage(sc, mc);

    const PairConfig& pair = setup.pairs.front();
    const double far = far_outage_conditional(effs[0].far, pair, setup.params).p;
    const double exact = near_outage_conditional_exact(effs[0].near, pair, setup.params).p;
    const double approx = near_outage_conditional_approx(effs[0].near, pair, setup.params).p;
    out.push_back(compare("far conditional vs mc", far, joint.far.p_hat, 3.0 * joint.far.stderr));
    out.push_back(
        compare("near exact vs joint mc", exact, joint.near.p_hat, 3.0 * joint.near.stderr));
    out.push_back(compare("near approx vs decorrelated mc", approx, split.near.p_hat,
                          3.0 * split.near.stderr));
}

} // namespace

std::vector<Check> run_validation(const ValidationOptions& options)
{
    std::vector<Check> out;
    kernel_checks(options, out);
    if (options.monte_carlo) {
        monte_carlo_checks(options, out);
    }
    return out;
}

} // namespace noma::cli

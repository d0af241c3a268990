#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "noma/asymptotic.hpp"
#include "noma/cli.hpp"

using namespace noma;
using namespace noma::cli;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::string out;
    bool deterministic = false;
    std::size_t point = 0;
    std::optional<double> series;
};

void add_common(CLI::App* app, Common& c, bool needs_config = true)
{
    if (needs_config) {
        app->add_option("config", c.config, "preset name (fig1..fig7) or config file")
            ->required();
    }
    app->add_option("--seed", c.seed, "master seed of the Monte Carlo streams");
    app->add_option("--trials", c.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
    app->add_option("--out", c.out, "output directory (sweep, simulate) or file");
    app->add_flag("--deterministic", c.deterministic, "omit the timestamp header line");
}

void add_point(CLI::App* app, Common& c)
{
    app->add_option("--point", c.point, "index into the sweep grid")->default_val(0);
    app->add_option("--series", c.series, "series value (defaults to the first)");
}

std::optional<double> series_of(const ExperimentConfig& cfg, const Common& c)
{
    if (!cfg.series_axis) {
        return std::nullopt;
    }
    return c.series ? c.series : std::optional<double>(cfg.series_values.front());
}

double point_of(const ExperimentConfig& cfg, const Common& c)
{
    if (c.point >= cfg.values.size()) {
        throw std::runtime_error("--point exceeds the sweep grid");
    }
    return cfg.values[c.point];
}

RunOptions run_options(const Common& c)
{
    RunOptions o;
    o.seed = c.seed;
    o.trials = c.trials;
    o.deterministic = c.deterministic;
    if (!c.out.empty()) {
        o.out_dir = c.out;
    }
    return o;
}

int run_sweep_command(ExperimentConfig cfg, const Common& c)
{
    const SweepResult res = run_sweep(cfg, run_options(c), std::cerr);
    for (const auto& f : res.files) {
        std::cout << f.string() << '\n';
    }
    if (res.failed_points > 0) {
        std::cerr << res.failed_points << " grid point(s) failed\n";
        return 2;
    }
    return 0;
}

void print_value(const char* label, const OutageValue& v)
{
    std::printf("  %-22s %s%s%s\n", label, format_number(v.p).c_str(),
                v.infeasible ? "  (infeasible split)" : "", v.degraded ? "  (degraded)" : "");
}

int analyze(const Common& c)
{
    const ExperimentConfig cfg = load_config(c.config);
    const double x = point_of(cfg, c);
    const PointSetup setup = make_point(cfg, series_of(cfg, c), x);
    const LinearDesign design = build_precoder(setup.channels, setup.params);
    const std::vector<PairEffective> effs =
        pair_effective_channels(design, setup.channels, setup.params);

    std::printf("%s at %s = %s\n", cfg.name.c_str(), axis_name(cfg.axis), format_number(x).c_str());
    std::printf("antenna selection %d%s, effective gains", design.selection,
                design.sampled ? " (sampled)" : "");
    for (Eigen::Index k = 0; k < design.gamma.size(); ++k) {
        std::printf(" %s", format_number(design.gamma(k)).c_str());
    }
    std::printf("\nsigma_h2 %s\n", format_number(setup.channels.front().near.sigma_h2).c_str());

    std::ofstream file;
    std::ostream* csv = nullptr;
    if (!c.out.empty()) {
        file.open(c.out, std::ios::binary);
        if (!file) {
            throw std::runtime_error("cannot write " + c.out);
        }
        csv = &file;
        write_csv_header(*csv);
    }
    for (std::size_t k = 0; k < effs.size(); ++k) {
        const PairConfig& pair = setup.pairs[k];
        const OutageThresholds th =
            outage_thresholds(effs[k].far, effs[k].near, pair, setup.params);
        const RateThresholds rt = rate_thresholds(effs[k].far, effs[k].near, pair, setup.params);
        std::printf("pair %zu: R_k %s, R_kt %s\n", k + 1, format_number(pair.R_k).c_str(),
                    format_number(pair.R_kt).c_str());
        std::printf("  thresholds tau_kt %s theta_k %s theta_kt %s\n",
                    format_number(th.tau_kt).c_str(), format_number(th.theta_k).c_str(),
                    format_number(th.theta_kt).c_str());
        std::printf("  rate ceilings R_kt(far) %s R_kt(near) %s R_k(near) %s\n",
                    format_number(rt.R_kt_max_far).c_str(),
                    format_number(rt.R_kt_max_near).c_str(),
                    format_number(rt.R_k_max_near).c_str());
        const OutageValue far = far_outage_conditional(effs[k].far, pair, setup.params,
                                                       cfg.inversion1d);
        const OutageValue exact = near_outage_conditional_exact(effs[k].near, pair, setup.params,
                                                                cfg.inversion2d);
        const OutageValue approx = near_outage_conditional_approx(effs[k].near, pair,
                                                                  setup.params, cfg.inversion1d);
        print_value("far conditional", far);
        print_value("near exact", exact);
        print_value("near approx", approx);
        if (setup.params.lambda_b > 0.0) {
            print_value("far average (random)",
                        far_outage_average(effs[k].far, pair, setup.params, GroupingPolicy::Random,
                                           cfg.inversion1d));
            print_value("near average (random)",
                        near_outage_average(effs[k].near, pair, setup.params,
                                            GroupingPolicy::Random, cfg.inversion2d));
        }
        if (csv && k == 0) {
            for (const auto& [tag, near] : {std::pair{"exact", exact}, std::pair{"approx", approx}}) {
                Row row;
                row.sweep_value = x;
                row.p_far = far.p;
                row.p_near = near.p;
                row.goodput = pair.R_k * (1.0 - near.p) + pair.R_kt * (1.0 - far.p);
                row.method = tag;
                row.seed = cfg.seed;
                write_csv_row(*csv, row);
            }
        }
    }
    return 0;
}

int simulate(const Common& c)
{
    ExperimentConfig cfg = load_config(c.config);
    cfg.methods = {Method::MonteCarlo};
    return run_sweep_command(cfg, c);
}

int optimize(const Common& c)
{
    const ExperimentConfig cfg = load_config(c.config);
    const double x = point_of(cfg, c);
    const PointSetup setup = make_point(cfg, series_of(cfg, c), x);
    const LinearDesign design = build_precoder(setup.channels, setup.params);
    const std::vector<PairEffective> effs =
        pair_effective_channels(design, setup.channels, setup.params);
    const std::vector<RateSolution> sol =
        maximize_goodput(effs, setup.pairs, cfg.epsilon, setup.params, cfg.inversion1d);
    std::printf("%s at %s = %s, epsilon %s\n", cfg.name.c_str(), axis_name(cfg.axis),
                format_number(x).c_str(), format_number(cfg.epsilon).c_str());
    for (std::size_t k = 0; k < sol.size(); ++k) {
        const RateSolution& s = sol[k];
        std::printf("pair %zu: R_k %s R_kt %s goodput %s p_near %s%s p_far %s%s%s\n", k + 1,
                    format_number(s.R_k).c_str(), format_number(s.R_kt).c_str(),
                    format_number(s.goodput).c_str(), format_number(s.p_near).c_str(),
                    s.near_binding ? " (binding)" : "", format_number(s.p_far).c_str(),
                    s.far_binding ? " (binding)" : "", s.infeasible ? " infeasible" : "");
    }
    std::printf("noma_precoded %s\n", format_number(total_goodput(sol)).c_str());
    for (BaselineScheme scheme :
         {BaselineScheme::OmaPrecoded, BaselineScheme::OmaPlain, BaselineScheme::NomaPlain}) {
        std::printf("%s %s\n", scheme_name(scheme),
                    format_number(baseline_goodput(scheme, setup.channels, setup.pairs,
                                                   cfg.epsilon, setup.params, cfg.inversion1d))
                        .c_str());
    }
    return 0;
}

int validate(const Common& c, std::optional<double> inversion_A, bool skip_mc)
{
    ValidationOptions o;
    o.inversion_A = inversion_A;
    if (c.seed) {
        o.seed = *c.seed;
    }
    if (c.trials) {
        o.trials = *c.trials;
    }
    o.monte_carlo = !skip_mc;
    std::printf("seed %llu, trials %zu\n", static_cast<unsigned long long>(o.seed), o.trials);
    int failures = 0;
    for (const Check& check : run_validation(o)) {
        std::printf("%-4s %-40s err %-24s tol %s\n", check.pass ? "PASS" : "FAIL",
                    check.name.c_str(), format_number(check.error).c_str(),
                    format_number(check.tolerance).c_str());
        failures += !check.pass;
    }
    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Outage analysis and design of MIMO-NOMA small cells with imperfect CSI"};
    app.require_subcommand(1);

    Common analyze_opts;
    auto* analyze_cmd = app.add_subcommand("analyze", "analytic outage at one grid point");
    add_common(analyze_cmd, analyze_opts);
    add_point(analyze_cmd, analyze_opts);

    Common simulate_opts;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo over the sweep grid");
    add_common(simulate_cmd, simulate_opts);

    Common optimize_opts;
    auto* optimize_cmd = app.add_subcommand("optimize", "goodput-optimal rates at one grid point");
    add_common(optimize_cmd, optimize_opts);
    add_point(optimize_cmd, optimize_opts);

    Common sweep_opts;
    auto* sweep_cmd = app.add_subcommand("sweep", "run every method of a preset or config");
    add_common(sweep_cmd, sweep_opts);

    Common validate_opts;
    std::optional<double> inversion_A;
    bool skip_mc = false;
    auto* validate_cmd = app.add_subcommand("validate", "inversion oracles and Monte Carlo checks");
    add_common(validate_cmd, validate_opts, false);
    validate_cmd->add_option("--inversion-A", inversion_A, "override the inversion parameter A");
    validate_cmd->add_flag("--skip-mc", skip_mc, "kernel oracles only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze_cmd) {
            return analyze(analyze_opts);
        }
        if (*simulate_cmd) {
            return simulate(simulate_opts);
        }
        if (*optimize_cmd) {
            return optimize(optimize_opts);
        }
        if (*sweep_cmd) {
            return run_sweep_command(load_config(sweep_opts.config), sweep_opts);
        }
        if (*validate_cmd) {
            return validate(validate_opts, inversion_A, skip_mc);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

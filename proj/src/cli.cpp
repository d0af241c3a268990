#include "noma/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "noma/asymptotic.hpp"
#include "noma_presets.hpp"

namespace noma::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

// One key = value entry with its location, for error reporting.
struct Entry {
    std::string key; // section.key
    std::string value;
    int line = 0;
};

class Reader {
public:
    Reader(const std::string& source, std::vector<Entry> entries)
        : source_(source), entries_(std::move(entries))
    {
    }

    [[noreturn]] void fail(const Entry& e, const std::string& message) const
    {
        throw ConfigError(source_, e.line, e.key, message);
    }

    double number(const Entry& e) const
    {
        const std::string v = lower(e.value);
        if (v == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        double x = 0.0;
        const char* end = e.value.data() + e.value.size();
        const auto res = std::from_chars(e.value.data(), end, x);
        if (res.ec != std::errc() || res.ptr != end || !std::isfinite(x)) {
            fail(e, "expected a finite number, got '" + e.value + "'");
        }
        return x;
    }

    std::uint64_t unsigned_integer(const Entry& e) const
    {
        std::uint64_t x = 0;
        const char* end = e.value.data() + e.value.size();
        const auto res = std::from_chars(e.value.data(), end, x);
        if (res.ec != std::errc() || res.ptr != end) {
            fail(e, "expected a nonnegative integer, got '" + e.value + "'");
        }
        return x;
    }

    int integer(const Entry& e) const
    {
        const std::uint64_t x = unsigned_integer(e);
        if (x > 1000000) {
            fail(e, "integer out of range");
        }
        return static_cast<int>(x);
    }

    std::vector<double> numbers(const Entry& e) const
    {
        std::vector<double> out;
        for (const std::string& item : split_list(e.value)) {
            Entry sub = e;
            sub.value = item;
            out.push_back(number(sub));
        }
        return out;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    const std::string& source() const { return source_; }

private:
    std::string source_;
    std::vector<Entry> entries_;
};

std::vector<Entry> tokenize(std::string_view text, const std::string& source)
{
    std::vector<Entry> out;
    std::map<std::string, int> seen;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = raw.find_first_of("#;");
        std::string line = trim(raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError(source, line_no, line, "malformed section header");
            }
            section = lower(trim(std::string_view(line).substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source, line_no, line, "expected key = value");
        }
        Entry e;
        const std::string key = lower(trim(std::string_view(line).substr(0, eq)));
        e.key = section.empty() ? key : section + "." + key;
        e.value = trim(std::string_view(line).substr(eq + 1));
        e.line = line_no;
        if (key.empty()) {
            throw ConfigError(source, line_no, e.key, "empty key");
        }
        if (e.value.empty()) {
            throw ConfigError(source, line_no, e.key, "empty value");
        }
        if (auto [it, fresh] = seen.emplace(e.key, line_no); !fresh) {
            throw ConfigError(source, line_no, e.key,
                              "duplicate key (first set on line " + std::to_string(it->second) +
                                  ")");
        }
        out.push_back(std::move(e));
    }
    return out;
}

Axis parse_axis(const Reader& r, const Entry& e)
{
    const std::string v = lower(e.value);
    if (v == "r_kt") {
        return Axis::RateFar;
    }
    if (v == "k_factor_db") {
        return Axis::KFactor;
    }
    if (v == "lambda_b") {
        return Axis::LambdaB;
    }
    if (v == "kappa") {
        return Axis::Kappa;
    }
    r.fail(e, "unknown axis '" + e.value + "' (R_kt, k_factor_db, lambda_b, kappa)");
}

std::vector<Method> parse_methods(const Reader& r, const Entry& e)
{
    std::vector<Method> out;
    for (const std::string& item : split_list(e.value)) {
        const std::string v = lower(item);
        Method m{};
        if (v == "exact") {
            m = Method::Exact;
        } else if (v == "approx") {
            m = Method::Approx;
        } else if (v == "mc") {
            m = Method::MonteCarlo;
        } else if (v == "asymptotic") {
            m = Method::Asymptotic;
        } else if (v == "optimize") {
            m = Method::Optimize;
        } else {
            r.fail(e, "unknown method '" + item + "'");
        }
        if (std::find(out.begin(), out.end(), m) != out.end()) {
            r.fail(e, "method '" + item + "' listed twice");
        }
        out.push_back(m);
    }
    return out;
}

std::vector<Mode> parse_modes(const Reader& r, const Entry& e)
{
    std::vector<Mode> out;
    for (const std::string& item : split_list(e.value)) {
        const std::string v = lower(item);
        Mode m{};
        if (v == "conditional") {
            m = Mode::Conditional;
        } else if (v == "random") {
            m = Mode::Random;
        } else if (v == "distance") {
            m = Mode::Distance;
        } else {
            r.fail(e, "unknown mode '" + item + "' (conditional, random, distance)");
        }
        if (std::find(out.begin(), out.end(), m) != out.end()) {
            r.fail(e, "mode '" + item + "' listed twice");
        }
        out.push_back(m);
    }
    return out;
}

void require_grid(const Reader& r, const Entry& e, const std::vector<double>& grid)
{
    if (grid.empty()) {
        r.fail(e, "grid is empty");
    }
    if (!std::is_sorted(grid.begin(), grid.end()) ||
        std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
        r.fail(e, "grid must be strictly increasing");
    }
}

void apply_axis(Axis axis, double value, PointSetup& setup, double& k_factor_db, double& kappa,
                double rate_ratio)
{
    switch (axis) {
    case Axis::RateFar:
        for (PairConfig& p : setup.pairs) {
            p.R_kt = value;
            p.R_k = rate_ratio * value;
        }
        break;
    case Axis::KFactor:
        k_factor_db = value;
        break;
    case Axis::LambdaB:
        setup.params.lambda_b = value;
        break;
    case Axis::Kappa:
        kappa = value;
        break;
    }
}

Row failed_row(double x, const std::string& method, std::uint64_t seed, const std::string& what)
{
    Row row;
    row.sweep_value = x;
    row.p_far = kNaN;
    row.p_near = kNaN;
    row.goodput = kNaN;
    row.method = method;
    row.seed = seed;
    row.error = what;
    return row;
}

double pair_goodput_at(const PairConfig& pair, double p_far, double p_near)
{
    return pair.R_k * (1.0 - p_near) + pair.R_kt * (1.0 - p_far);
}

GroupingPolicy policy_of(Mode mode)
{
    return mode == Mode::Distance ? GroupingPolicy::DistanceBased : GroupingPolicy::Random;
}

std::string mode_method(Mode mode, Method method)
{
    std::string tag = method_tag(method);
    if (mode != Mode::Conditional) {
        tag = std::string(mode_name(mode)) + "_" + tag;
    }
    return tag;
}

// Analytic rows of one sweep point.
std::vector<Row> analytic_point(const ExperimentConfig& config, const PointSetup& setup, Mode mode,
                                Method method, double x)
{
    const LinearDesign design = build_precoder(setup.channels, setup.params);
    const std::vector<PairEffective> effs =
        pair_effective_channels(design, setup.channels, setup.params);
    const PairEffective& eff = effs.front();
    const PairConfig& pair = setup.pairs.front();
    const std::string tag = mode_method(mode, method);

    Row row;
    row.sweep_value = x;
    row.method = tag;
    row.seed = config.seed;

    if (method == Method::Asymptotic) {
        const double sigma_h2 = setup.channels.front().near.sigma_h2;
        row.p_far = std::min(
            1.0, optimize_chernoff_far(eff.far, pair, setup.params, setup.channels.front().far.sigma_h2)
                     .bound);
        row.p_near =
            std::min(1.0, optimize_chernoff_near(eff.near, pair, setup.params, sigma_h2).bound);
        row.goodput = pair_goodput_at(pair, row.p_far, row.p_near);
        return {row};
    }

    if (method == Method::Optimize) {
        std::vector<Row> rows;
        const std::vector<RateSolution> sol =
            maximize_goodput(effs, setup.pairs, config.epsilon, setup.params, config.inversion1d);
        row.method = "optimize_noma_precoded";
        row.p_far = sol.front().p_far;
        row.p_near = sol.front().p_near;
        row.goodput = total_goodput(sol);
        rows.push_back(row);
        for (BaselineScheme scheme :
             {BaselineScheme::OmaPrecoded, BaselineScheme::OmaPlain, BaselineScheme::NomaPlain}) {
            Row b = row;
            b.method = std::string("optimize_") + scheme_name(scheme);
            b.p_far = kNaN;
            b.p_near = kNaN;
            b.goodput = baseline_goodput(scheme, setup.channels, setup.pairs, config.epsilon,
                                         setup.params, config.inversion1d);
            rows.push_back(b);
        }
        return rows;
    }

    OutageValue far;
    OutageValue near;
    if (mode == Mode::Conditional) {
        far = far_outage_conditional(eff.far, pair, setup.params, config.inversion1d);
        near = method == Method::Exact
                   ? near_outage_conditional_exact(eff.near, pair, setup.params,
                                                   config.inversion2d)
                   : near_outage_conditional_approx(eff.near, pair, setup.params,
                                                    config.inversion1d);
    } else {
        // The approximate average uses the interference-limited closed forms.
        const FunctionalMethod fm = method == Method::Exact ? FunctionalMethod::Auto
                                                            : FunctionalMethod::InterferenceLimited;
        far = far_outage_average(eff.far, pair, setup.params, policy_of(mode), config.inversion1d,
                                 fm);
        near = near_outage_average(eff.near, pair, setup.params, policy_of(mode),
                                   config.inversion2d, fm);
    }
    row.p_far = far.p;
    row.p_near = near.p;
    row.goodput = pair_goodput_at(pair, far.p, near.p);
    return {row};
}

McOptions mc_options(const ExperimentConfig& config, Mode mode, unsigned workers)
{
    McOptions o;
    o.trials = config.trials;
    o.seed = config.seed;
    o.window_radius = config.window_radius;
    o.workers = workers;
    switch (mode) {
    case Mode::Conditional:
        o.mode = McMode::Conditional;
        break;
    case Mode::Random:
        o.mode = McMode::AverageRandom;
        break;
    case Mode::Distance:
        o.mode = McMode::AverageDistance;
        break;
    }
    return o;
}

Row mc_row(const McOutage& est, const PairConfig& pair, double x, const std::string& tag,
           std::uint64_t seed)
{
    Row row;
    row.sweep_value = x;
    row.p_far = est.far.p_hat;
    row.p_near = est.near.p_hat;
    row.stderr_far = est.far.stderr;
    row.stderr_near = est.near.stderr;
    row.goodput = pair_goodput_at(pair, row.p_far, row.p_near);
    row.method = tag;
    row.seed = seed;
    return row;
}

template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& body)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                body(i);
            }
        });
    }
}

std::string file_component(double x)
{
    std::string s = format_number(x);
    std::replace(s.begin(), s.end(), '+', 'p');
    return s;
}

} // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& field,
                         const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + field + ": " + message),
      line_(line), field_(field)
{
}

const char* axis_name(Axis axis)
{
    switch (axis) {
    case Axis::RateFar:
        return "R_kt";
    case Axis::KFactor:
        return "k_factor_db";
    case Axis::LambdaB:
        return "lambda_b";
    case Axis::Kappa:
        return "kappa";
    }
    return "unknown";
}

const char* method_tag(Method method)
{
    switch (method) {
    case Method::Exact:
        return "exact";
    case Method::Approx:
        return "approx";
    case Method::MonteCarlo:
        return "mc";
    case Method::Asymptotic:
        return "asymptotic";
    case Method::Optimize:
        return "optimize";
    }
    return "unknown";
}

const char* mode_name(Mode mode)
{
    switch (mode) {
    case Mode::Conditional:
        return "conditional";
    case Mode::Random:
        return "random";
    case Mode::Distance:
        return "distance";
    }
    return "unknown";
}

ExperimentConfig parse_config(std::string_view text, const std::string& source)
{
    const Reader r(source, tokenize(text, source));
    ExperimentConfig cfg;
    const Entry* values_entry = nullptr;
    const Entry* series_values_entry = nullptr;
    const Entry* series_axis_entry = nullptr;
    bool have_values = false;

    for (const Entry& e : r.entries()) {
        const std::string& k = e.key;
        NetworkParams& p = cfg.params;
        if (k == "network.lambda_b") {
            p.lambda_b = r.number(e);
        } else if (k == "network.lambda_u") {
            p.lambda_u = r.number(e);
        } else if (k == "network.alpha") {
            p.alpha = r.number(e);
        } else if (k == "network.p_dbm") {
            p.P = dbm_to_watt(r.number(e));
        } else if (k == "network.rho_i_dbm") {
            p.rho_I = dbm_to_watt(r.number(e));
        } else if (k == "network.sigma2_dbm") {
            const double v = r.number(e);
            p.sigma2 = std::isinf(v) ? 0.0 : dbm_to_watt(v);
        } else if (k == "network.m") {
            p.M = r.integer(e);
        } else if (k == "network.n") {
            p.N = r.integer(e);
        } else if (k == "network.k") {
            p.K = r.integer(e);
        } else if (k == "network.c") {
            p.c = r.number(e);
        } else if (k == "channel.k_factor_db") {
            cfg.k_factor_db = r.number(e);
        } else if (k == "channel.kappa") {
            cfg.kappa = r.number(e);
        } else if (k == "channel.seed") {
            cfg.channel_seed = r.unsigned_integer(e);
        } else if (k == "pair.beta_k2") {
            cfg.pair.beta_k2 = r.number(e);
        } else if (k == "pair.d_k") {
            cfg.pair.d_k = r.number(e);
        } else if (k == "pair.d_kt") {
            cfg.pair.d_kt = r.number(e);
        } else if (k == "pair.r_kt") {
            cfg.pair.R_kt = r.number(e);
        } else if (k == "pair.rate_ratio") {
            cfg.rate_ratio = r.number(e);
            if (!(cfg.rate_ratio > 0.0)) {
                r.fail(e, "rate ratio must be positive");
            }
        } else if (k == "sweep.axis") {
            cfg.axis = parse_axis(r, e);
        } else if (k == "sweep.values") {
            cfg.values = r.numbers(e);
            values_entry = &e;
            have_values = true;
        } else if (k == "sweep.series_axis") {
            cfg.series_axis = parse_axis(r, e);
            series_axis_entry = &e;
        } else if (k == "sweep.series_values") {
            cfg.series_values = r.numbers(e);
            series_values_entry = &e;
        } else if (k == "run.mode") {
            cfg.modes = parse_modes(r, e);
        } else if (k == "run.methods") {
            cfg.methods = parse_methods(r, e);
        } else if (k == "run.trials") {
            cfg.trials = r.unsigned_integer(e);
            if (cfg.trials == 0) {
                r.fail(e, "trials must be positive");
            }
        } else if (k == "run.seed") {
            cfg.seed = r.unsigned_integer(e);
        } else if (k == "run.epsilon") {
            cfg.epsilon = r.number(e);
            if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
                r.fail(e, "epsilon must lie in (0, 1)");
            }
        } else if (k == "run.window_radius") {
            cfg.window_radius = r.number(e);
        } else if (k == "run.name") {
            cfg.name = e.value;
        } else if (k == "inversion.a") {
            cfg.inversion1d.A = r.number(e);
        } else if (k == "inversion.euler_terms") {
            cfg.inversion1d.euler_terms = r.integer(e);
        } else if (k == "inversion.truncation") {
            cfg.inversion1d.truncation = r.integer(e);
        } else if (k == "inversion.a2") {
            cfg.inversion2d.A = r.number(e);
        } else if (k == "inversion.l2") {
            cfg.inversion2d.L = r.integer(e);
        } else if (k == "inversion.eps_depth") {
            cfg.inversion2d.eps_depth = r.integer(e);
        } else if (k == "inversion.period_factor") {
            cfg.inversion2d.period_factor = r.number(e);
        } else {
            r.fail(e, "unknown key");
        }
    }

    Entry at_end;
    at_end.key = "sweep.values";
    at_end.line = 0;
    if (!have_values) {
        r.fail(at_end, "missing sweep grid");
    }
    require_grid(r, *values_entry, cfg.values);
    if (cfg.series_axis.has_value() != !cfg.series_values.empty()) {
        const Entry& e = series_axis_entry ? *series_axis_entry : *series_values_entry;
        r.fail(e, "series_axis and series_values go together");
    }
    if (cfg.series_axis) {
        require_grid(r, *series_values_entry, cfg.series_values);
        if (*cfg.series_axis == cfg.axis) {
            r.fail(*series_axis_entry, "series axis repeats the sweep axis");
        }
    }
    if (cfg.modes.empty()) {
        at_end.key = "run.mode";
        r.fail(at_end, "no mode given");
    }
    if (cfg.methods.empty()) {
        at_end.key = "run.methods";
        r.fail(at_end, "no method given");
    }
    const bool optimize =
        std::find(cfg.methods.begin(), cfg.methods.end(), Method::Optimize) != cfg.methods.end();
    if (optimize && (cfg.axis == Axis::RateFar || cfg.series_axis == Axis::RateFar)) {
        r.fail(*values_entry, "optimize chooses the rates itself; sweep another axis");
    }

    // Catch parameter errors now rather than at every sweep point.
    try {
        cfg.params.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(source, 0, "network", ex.what());
    }
    try {
        PairConfig outer = cfg.pair;
        outer.r_k = 1;
        outer.r_kt = 2 * cfg.params.K;
        outer.validate(cfg.params.K);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(source, 0, "pair", ex.what());
    }
    return cfg;
}

std::vector<std::string> preset_names()
{
    std::vector<std::string> out;
    for (const auto& p : embedded_presets) {
        out.emplace_back(p.name);
    }
    return out;
}

std::optional<std::string_view> preset_text(std::string_view name)
{
    for (const auto& p : embedded_presets) {
        if (p.name == name) {
            return p.text;
        }
    }
    return std::nullopt;
}

ExperimentConfig load_config(const std::string& preset_or_path)
{
    if (const auto text = preset_text(preset_or_path)) {
        ExperimentConfig cfg = parse_config(*text, preset_or_path);
        if (cfg.name == "experiment") {
            cfg.name = preset_or_path;
        }
        return cfg;
    }
    std::ifstream in(preset_or_path);
    if (!in) {
        throw std::runtime_error("'" + preset_or_path +
                                 "' is neither a preset nor a readable config file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_config(buf.str(), preset_or_path);
    if (cfg.name == "experiment") {
        cfg.name = std::filesystem::path(preset_or_path).stem().string();
    }
    return cfg;
}

PointSetup make_point(const ExperimentConfig& config, std::optional<double> series_value,
                      double sweep_value)
{
    PointSetup setup;
    setup.params = config.params;
    const int K = setup.params.K;
    for (int k = 0; k < K; ++k) {
        PairConfig p = config.pair;
        p.R_k = config.rate_ratio * p.R_kt;
        // Farthest with nearest, then inwards.
        p.r_k = k + 1;
        p.r_kt = 2 * K - k;
        setup.pairs.push_back(p);
    }
    double k_factor_db = config.k_factor_db;
    double kappa = config.kappa;
    if (config.series_axis && series_value) {
        apply_axis(*config.series_axis, *series_value, setup, k_factor_db, kappa,
                   config.rate_ratio);
    }
    apply_axis(config.axis, sweep_value, setup, k_factor_db, kappa, config.rate_ratio);
    setup.params.validate();

    // The known channels depend only on the channel seed.
    Rng rng = make_rng(config.channel_seed, 0);
    for (int k = 0; k < K; ++k) {
        const CMatrix H_near = sample_known_channel(setup.params.N, setup.params.M, rng);
        const CMatrix H_far = sample_known_channel(setup.params.N, setup.params.M, rng);
        setup.channels.push_back({make_channel_estimate(H_near, kappa, k_factor_db),
                                  make_channel_estimate(H_far, kappa, k_factor_db)});
    }
    return setup;
}

std::string format_number(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv_header(std::ostream& out)
{
    out << "sweep_value,p_far,p_near,stderr_far,stderr_near,goodput,method,seed\n";
}

void write_csv_row(std::ostream& out, const Row& row)
{
    out << format_number(row.sweep_value) << ',' << format_number(row.p_far) << ','
        << format_number(row.p_near) << ','
        << (row.stderr_far ? format_number(*row.stderr_far) : "") << ','
        << (row.stderr_near ? format_number(*row.stderr_near) : "") << ','
        << format_number(row.goodput) << ',' << row.method << ',' << row.seed << '\n';
}

std::vector<Row> evaluate(const ExperimentConfig& config, Mode mode, Method method,
                          std::optional<double> series_value, unsigned workers)
{
    const std::size_t n = config.values.size();
    const std::string tag = mode_method(mode, method);

    if (method == Method::MonteCarlo && config.axis == Axis::RateFar) {
        // One set of trials serves the whole rate grid.
        std::vector<Row> rows;
        try {
            const PointSetup setup = make_point(config, series_value, config.values.front());
            const LinearDesign design = build_precoder(setup.channels, setup.params);
            const Scenario sc = make_scenario(design, setup.channels, setup.pairs, 0, setup.params);
            std::vector<RatePoint> rates;
            for (double x : config.values) {
                rates.push_back({config.rate_ratio * x, x});
            }
            const std::vector<McOutage> est =
                estimate_outage(sc, rates, mc_options(config, mode, workers));
            for (std::size_t i = 0; i < n; ++i) {
                PairConfig pair = sc.pair;
                pair.R_k = rates[i].R_k;
                pair.R_kt = rates[i].R_kt;
                rows.push_back(mc_row(est[i], pair, config.values[i], tag, config.seed));
            }
        } catch (const std::exception& ex) {
            for (double x : config.values) {
                rows.push_back(failed_row(x, tag, config.seed, ex.what()));
            }
        }
        return rows;
    }

    // Monte Carlo parallelizes inside a point; analytic methods across points.
    const unsigned point_workers = method == Method::MonteCarlo ? 1 : workers;
    const unsigned inner_workers = method == Method::MonteCarlo ? workers : 1;
    std::vector<std::vector<Row>> slots(n);
    parallel_for(n, point_workers, [&](std::size_t i) {
        const double x = config.values[i];
        try {
            const PointSetup setup = make_point(config, series_value, x);
            if (method == Method::MonteCarlo) {
                const LinearDesign design = build_precoder(setup.channels, setup.params);
                const Scenario sc =
                    make_scenario(design, setup.channels, setup.pairs, 0, setup.params);
                slots[i] = {mc_row(estimate_outage(sc, mc_options(config, mode, inner_workers)),
                                   sc.pair, x, tag, config.seed)};
            } else {
                slots[i] = analytic_point(config, setup, mode, method, x);
            }
        } catch (const std::exception& ex) {
            if (method == Method::Optimize) {
                slots[i] = {failed_row(x, "optimize_noma_precoded", config.seed, ex.what())};
                for (BaselineScheme scheme : {BaselineScheme::OmaPrecoded, BaselineScheme::OmaPlain,
                                              BaselineScheme::NomaPlain}) {
                    slots[i].push_back(failed_row(x, std::string("optimize_") + scheme_name(scheme),
                                                  config.seed, ex.what()));
                }
            } else {
                slots[i] = {failed_row(x, tag, config.seed, ex.what())};
            }
        }
    });
    std::vector<Row> rows;
    for (auto& slot : slots) {
        rows.insert(rows.end(), slot.begin(), slot.end());
    }
    return rows;
}

SweepResult run_sweep(const ExperimentConfig& base, const RunOptions& options, std::ostream& log)
{
    ExperimentConfig config = base;
    if (options.seed) {
        config.seed = *options.seed;
    }
    if (options.trials) {
        config.trials = *options.trials;
    }
    const unsigned workers =
        options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
    std::filesystem::create_directories(options.out_dir);

    std::vector<std::optional<double>> series{std::nullopt};
    if (config.series_axis) {
        series.assign(config.series_values.begin(), config.series_values.end());
    }

    std::string stamp;
    if (!options.deterministic) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[64];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        stamp = buf;
    }

    SweepResult result;
    for (const auto& s : series) {
        for (Mode mode : config.modes) {
            for (Method method : config.methods) {
                if (method == Method::Asymptotic && mode != Mode::Conditional) {
                    log << "skipping asymptotic for mode " << mode_name(mode)
                        << ": bounds are conditional\n";
                    continue;
                }
                const std::vector<Row> rows = evaluate(config, mode, method, s, workers);

                // One file per method tag; optimize yields several.
                std::vector<std::string> tags;
                for (const Row& row : rows) {
                    if (std::find(tags.begin(), tags.end(), row.method) == tags.end()) {
                        tags.push_back(row.method);
                    }
                }
                for (const std::string& tag : tags) {
                    std::string stem = config.name + "_" + tag;
                    if (s) {
                        stem += std::string("_") + axis_name(*config.series_axis) +
                                file_component(*s);
                    }
                    const std::filesystem::path path = options.out_dir / (stem + ".csv");
                    std::ofstream out(path, std::ios::binary);
                    if (!out) {
                        throw std::runtime_error("cannot write " + path.string());
                    }
                    if (!options.deterministic) {
                        out << "# generated " << stamp << '\n';
                    }
                    write_csv_header(out);
                    for (const Row& row : rows) {
                        if (row.method != tag) {
                            continue;
                        }
                        write_csv_row(out, row);
                        if (!row.error.empty()) {
                            ++result.failed_points;
                            log << path.filename().string() << ": " << axis_name(config.axis)
                                << "=" << format_number(row.sweep_value)
                                << " failed: " << row.error << '\n';
                        }
                    }
                    result.files.push_back(path);
                }
            }
        }
    }
    return result;
}

} // namespace noma::cli

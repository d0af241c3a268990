#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "noma/design.hpp"
#include "noma/montecarlo.hpp"

namespace noma::cli {

/// Schema or syntax error in a config file; carries the offending line and key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& field,
                const std::string& message);

    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    int line_;
    std::string field_;
};

enum class Axis { RateFar, KFactor, LambdaB, Kappa };

const char* axis_name(Axis axis);

enum class Method { Exact, Approx, MonteCarlo, Asymptotic, Optimize };

const char* method_tag(Method method);

enum class Mode { Conditional, Random, Distance };

const char* mode_name(Mode mode);

struct ExperimentConfig {
    std::string name = "experiment";
    NetworkParams params;
    PairConfig pair;          ///< pair 1; R_k follows rate_ratio * R_kt
    double rate_ratio = 2.0;
    double k_factor_db = 20.0;
    double kappa = 0.9;
    std::uint64_t channel_seed = 2024;

    Axis axis = Axis::RateFar;
    std::vector<double> values;
    std::optional<Axis> series_axis;
    std::vector<double> series_values;

    std::vector<Mode> modes{Mode::Conditional};
    std::vector<Method> methods{Method::Exact};
    std::size_t trials = 10000;
    std::uint64_t seed = 1;
    double epsilon = 1e-2;
    double window_radius = 5000.0;

    Inversion1DConfig inversion1d;
    Inversion2DConfig inversion2d;
};

/// Parses flat key = value text with [section] headers. Missing keys keep the defaults.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");

/// A preset name (fig1..fig7) or a path to a config file.
ExperimentConfig load_config(const std::string& preset_or_path);

std::vector<std::string> preset_names();
std::optional<std::string_view> preset_text(std::string_view name);

/// Scenario of one sweep point: parameters plus the pinned channel realization.
struct PointSetup {
    NetworkParams params;
    std::vector<PairConfig> pairs;
    std::vector<PairChannels> channels;
};

/// Applies the series and sweep values to the base config.
PointSetup make_point(const ExperimentConfig& config, std::optional<double> series_value,
                      double sweep_value);

struct Row {
    double sweep_value = 0.0;
    double p_far = 0.0;
    double p_near = 0.0;
    std::optional<double> stderr_far;
    std::optional<double> stderr_near;
    double goodput = 0.0;
    std::string method;
    std::uint64_t seed = 0;
    std::string error; ///< nonempty when the point failed
};

/// Shortest round-trip text with 17 significant digits; NaN as "nan".
std::string format_number(double x);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const Row& row);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::filesystem::path out_dir = ".";
    bool deterministic = false;
    unsigned workers = 0; ///< sweep workers; 0 -> hardware concurrency
};

struct SweepResult {
    std::vector<std::filesystem::path> files;
    std::size_t failed_points = 0;
};

/// Runs every (mode, method, series) combination of the config and writes one CSV each.
SweepResult run_sweep(const ExperimentConfig& config, const RunOptions& options,
                      std::ostream& log);

/// Rows of one method over the sweep grid, in sweep order.
std::vector<Row> evaluate(const ExperimentConfig& config, Mode mode, Method method,
                          std::optional<double> series_value, unsigned workers);

struct Check {
    std::string name;
    double error = 0.0;     ///< observed deviation
    double tolerance = 0.0;
    bool pass = false;
};

struct ValidationOptions {
    std::optional<double> inversion_A; ///< overrides A of both inversions
    std::uint64_t seed = 1;
    std::size_t trials = 20000;
    bool monte_carlo = true;
};

/// Inversion kernels against closed-form pairs, then analytic outage against Monte Carlo
/// at the default operating point.
std::vector<Check> run_validation(const ValidationOptions& options);

} // namespace noma::cli

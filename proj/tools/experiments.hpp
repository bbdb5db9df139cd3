#pragma once

// Declarative experiments: YAML config in, CSV rows + JSON summary out.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "eqrecip/scheduler.hpp"
#include "eqrecip/three_user.hpp"

namespace eqr::tools {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
    ratios,
    n_symmetric_sweep,
    asym_two_user,
    lp_three_user,
    grouping,
    dynamic,
    stability_sweep,
    utility,
    markov,
    lossy_d2d,
};

std::string_view to_string(ExperimentKind k);
const std::vector<ExperimentKind>& all_kinds();
std::string_view describe(ExperimentKind k);

struct ExperimentConfig {
    ExperimentKind kind;
    std::string name;  ///< output stem
    std::uint64_t seed = 1;
    std::uint64_t trials = 0;  ///< Monte Carlo cross-check per row; 0 = formulas only
    std::uint64_t horizon = 100000;
    std::uint64_t slot_cap = 1000000;
    std::string output;  ///< directory, may be empty

    // kind-specific parameters; only the ones the kind uses are filled
    std::vector<double> error_probs;           ///< p_e grid, or one entry per user
    std::vector<int> users;                    ///< group sizes
    std::vector<std::vector<double>> points;   ///< pairs, triples or (zeta_01, zeta_10)
    std::vector<double> gammas;
    std::vector<double> arrival_rates;
    std::vector<SchedulingMode> modes;
    ReciprocityForm reciprocity_form = ReciprocityForm::balanced;

    YAML::Node document;  ///< echoed into the JSON summary
    std::string source;
};

/// Parses and fully validates a config file; throws ConfigError with file:line.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");

struct ExperimentResult {
    std::string csv;
    nlohmann::json summary;
};

/// Runs a validated config. Numeric failures (e.g. an infeasible LP) throw std::runtime_error.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes <dir>/<name>.csv and <dir>/<name>.json; returns the CSV path.
std::string write_result(const ExperimentConfig& cfg, const ExperimentResult& result,
                         const std::string& dir);

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
std::string format_number(double v);

}  // namespace eqr::tools

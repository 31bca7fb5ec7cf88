#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pxcl/domains.hpp"
#include "pxcl/trainer.hpp"

namespace pxcl {

// Bad user input: malformed or invalid config, dataset, or manifest. The CLI
// maps this to exit code 2; every other exception maps to 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

struct DatasetConfig {
    enum class Kind { Synthetic, Canonical };
    Kind kind = Kind::Synthetic;
    std::filesystem::path path;  // canonical datasets only
    SyntheticConfig synthetic;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::vector<DomainSpec> domains;
    std::vector<Strategy> strategies;
    TrainConfig train;  // strategy field is overwritten per requested strategy
    std::vector<std::size_t> sweep;
    std::filesystem::path output_dir = "results";
};

// The reference experiment: synthetic data, the five-domain curriculum, all
// four strategies, and the reference hyperparameters.
ExperimentConfig default_experiment_config();

// Parses and validates a JSON config. `origin` names the source in messages
// (file path or "<inline>"). Syntax errors carry origin:line:col; semantic
// errors name the offending key. Missing keys fall back to defaults; unknown
// keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Canonical JSON echo of the effective config. Re-parsing the echo yields the
// same experiment; the rendering is deterministic, so echoes are comparable
// byte for byte.
std::string render_experiment_config(const ExperimentConfig& config);

}  // namespace pxcl

#pragma once

// Plain key=value experiment configs with dotted keys. Lines starting with
// '#' are comments. Every key has a per-environment default; unknown keys are
// rejected. The resolved settings (defaults included) are what the manifest
// stores, and parsing them again gives the same config.

#include "sgfn/env.hpp"
#include "sgfn/mcmc.hpp"
#include "sgfn/trainer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sgfn {

using Settings = std::map<std::string, std::string>;

struct ExperimentConfig {
    EnvSpec env;
    TrainConfig train;
    int mcmc_chains = 16;
    std::vector<std::string> methods;  // db, tb, stoch_db, stoch_tb, mcmc
    std::vector<std::uint64_t> seeds;
    std::string output;
};

// Keys known to the parser, in manifest order.
const std::vector<std::string>& config_keys();
bool is_sweepable(const std::string& key);

Settings default_settings(EnvKind kind);

// "key=value" -> (key, value). Throws ConfigError on a malformed entry.
std::pair<std::string, std::string> split_assignment(const std::string& entry);
Settings parse_settings_text(const std::string& text, const std::string& origin = "<inline>");
// A .json path is read as a manifest (its "config" object); anything else as key=value text.
Settings read_settings_file(const std::string& path);

// Fills defaults for the chosen env.kind, converts and validates. Throws
// ConfigError naming the key and the expected form.
ExperimentConfig resolve_config(const Settings& user);
// Fully explicit settings for a resolved config.
Settings to_settings(const ExperimentConfig& cfg);

// Run parameters derived from the experiment config.
TrainConfig train_config_for(const ExperimentConfig& cfg, const std::string& method, std::uint64_t seed);
McmcConfig mcmc_config_for(const ExperimentConfig& cfg, std::uint64_t seed);

std::string format_double(double v);

}  // namespace sgfn

#pragma once

// Experiment orchestration behind the command-line tool: one metrics JSONL
// (and checkpoint) per (method, seed), a manifest written before any run
// starts, sweeps over a config key, checkpoint re-evaluation and kernel dumps.

#include "sgfn/config.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace sgfn {

inline constexpr const char* kOutputRootEnv = "SGFN_OUTPUT_ROOT";

struct RunOptions {
    std::string output_root;  // prefixed to a relative cfg.output; empty = as given
    bool checkpoints = true;
    std::ostream* log = nullptr;
    std::string label_suffix;    // sweeps embed "<key>-<value>" here
    std::string manifest_name = "manifest.json";
};

struct RunOutcome {
    std::vector<std::string> metrics_files;
    std::vector<std::string> abort_snapshots;
    bool ok() const { return abort_snapshots.empty(); }
};

std::string build_fingerprint();
std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts);
std::string run_label(const ExperimentConfig& cfg, const RunOptions& opts);
std::string metrics_file_name(const std::string& method, const std::string& label, std::uint64_t seed);

nlohmann::ordered_json manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& planned);

// Trains every (method, seed). A run that aborts leaves a snapshot next to
// its metrics and the remaining runs still execute.
RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

// One run_experiment per value of `key`. Throws ConfigError for a
// non-sweepable key or an empty value list.
RunOutcome sweep_experiment(const Settings& base, const std::string& key, const std::vector<std::string>& values,
                            const RunOptions& opts);

// Rebuilds a model from its config and checkpoint and recomputes metrics:
// exact L1 when enumerable, plus empirical metrics from `samples` rollouts.
nlohmann::ordered_json eval_checkpoint(const ExperimentConfig& cfg, const std::string& method,
                                       const std::string& checkpoint, std::size_t samples, std::uint64_t seed);

// Kernel table of an enumerable env: "<s> <a> -> <s'> <p>" per edge, then "R <x> <reward>".
void dump_env(const Env& env, std::ostream& out);

}  // namespace sgfn

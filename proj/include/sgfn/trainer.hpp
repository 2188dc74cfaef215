#pragma once

// Training loop: every iteration collects M fresh rollouts into the replay
// buffer, takes one GFlowNet step on them, then one dynamics-model step on K
// records drawn from the buffer.

#include "sgfn/dynamics.hpp"
#include "sgfn/env.hpp"
#include "sgfn/eval.hpp"
#include "sgfn/gfn.hpp"
#include "sgfn/objectives.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgfn {

enum class DynamicsMode { learned, oracle };
std::string to_string(DynamicsMode m);
DynamicsMode parse_dynamics_mode(const std::string& s);

struct TrainConfig {
    Objective objective = Objective::stoch_db;
    DynamicsMode dynamics_mode = DynamicsMode::learned;
    DynamicsKind dynamics_kind = DynamicsKind::neural;
    std::int64_t iterations = 20000;
    int rollouts = 16;    // M
    int model_batch = 16;  // K
    double lr = 1e-3;
    double lr_logz = 0.1;
    double lr_model = 1e-4;
    double epsilon = 0.0;
    double reward_exponent = 1.0;
    std::size_t buffer_capacity = 100000;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 100;

    ParamKind param_kind = ParamKind::neural;
    std::vector<int> hidden{256, 256};
    std::vector<int> model_hidden{256, 256};
    nn::Activation activation = nn::Activation::leaky_relu;
    bool learned_backward = true;
    double model_smoothing = 0.1;

    int warmup = 10;  // stoch_* with a learned model skip the GFlowNet step this long
    std::size_t eval_window = 100000;
    std::size_t topk = 100;
    L1Variant l1_variant = L1Variant::mean;
    int mode_delta = 0;

    // Throws ConfigError naming the field.
    void validate() const;
};

// One JSONL line. Absent values serialise as null.
struct MetricsRecord {
    std::int64_t iteration = 0;
    double wall_ms = 0.0;
    std::optional<double> loss;
    std::optional<double> model_loss;
    std::optional<double> l1_exact;
    std::optional<double> l1_empirical;
    int modes = 0;
    std::optional<double> top100_mean;
    std::optional<double> top100_median;
    int clamped_terms = 0;
    std::uint64_t seed = 0;
    std::string method;
    std::string env;
    std::optional<double> grad_norm;

    nlohmann::ordered_json to_json() const;
    static MetricsRecord from_json(const nlohmann::ordered_json& j);
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

// Raised when a loss or gradient goes non-finite.
class TrainingAbort : public std::runtime_error {
public:
    TrainingAbort(std::string what, std::int64_t iteration, int clamped, std::vector<Trajectory> batch);
    std::int64_t iteration() const { return iteration_; }
    int clamped_terms() const { return clamped_; }
    const std::vector<Trajectory>& batch() const { return batch_; }
    // Iteration, clamp count and the offending batch as text.
    void write_snapshot(const std::string& path) const;

private:
    std::int64_t iteration_;
    int clamped_;
    std::vector<Trajectory> batch_;
};

struct TrainRun {
    std::unique_ptr<GfnModel> model;
    std::unique_ptr<TransitionModel> dynamics;
    std::vector<MetricsRecord> metrics;
    std::vector<double> grad_norms;  // GFlowNet gradient norm per update
    std::vector<StepRecord> buffer;  // final buffer contents, oldest first
    double wall_ms = 0.0;
    std::int64_t updates = 0;
};

// Dynamics actually used by an objective: the plain objectives never query P^.
bool uses_dynamics(const TrainConfig& cfg);

TrainRun train(const Env& env, const TrainConfig& cfg, const MetricsSink& sink = {});

// Random-stream ids split off the root seed.
enum StreamId : std::uint64_t { kStreamInit = 1, kStreamRollout = 2, kStreamBuffer = 3, kStreamModelInit = 4 };

}  // namespace sgfn

#pragma once

// Learned categorical transition model P^(s'|s,a) and the replay buffer that
// feeds it.
//
// Candidate next states for (s, a) are the noise-free outcomes of every valid
// action at s, so P^ is a softmax over num_actions() slots masked to
// actions(s); slot j stands for intended_outcome(s, j).

#include "sgfn/autodiff.hpp"
#include "sgfn/env.hpp"
#include "sgfn/nn.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sgfn {

inline constexpr double kLogFloor = 1e-30;

enum class DynamicsKind { neural, tabular, oracle };

std::string to_string(DynamicsKind k);
DynamicsKind parse_dynamics_kind(const std::string& s);

// Slot of s_next in the candidate set of (s, a). Throws std::invalid_argument
// naming (s, a, s') when s_next is not a candidate.
int candidate_slot(const Env& env, const EvenState& s, ActionId a, const EvenState& s_next);

class TransitionModel {
public:
    virtual ~TransitionModel() = default;

    virtual DynamicsKind kind() const = 0;
    // Distribution over candidate slots (length num_actions, zero outside actions(s)).
    virtual std::vector<double> predict(const EvenState& s, ActionId a) const = 0;
    // log P^(s'|s,a) per record, floored at kLogFloor. Treated as constants by
    // the GFlowNet objectives.
    virtual std::vector<double> log_probs(std::span<const StepRecord> batch) const;
    // Mean negative log-likelihood of the batch (no gradient).
    double nll(std::span<const StepRecord> batch) const;
    // One learning step on the batch; returns the pre-update loss. No-op for the oracle.
    virtual double update(std::span<const StepRecord> batch) = 0;

    virtual nn::TensorMap state_dict() const { return {}; }
    virtual void load_state_dict(const nn::TensorMap&) {}

protected:
    explicit TransitionModel(const Env& env) : env_(&env) {}
    const Env* env_;
};

// The true environment kernel, used for exactness tests and ablations.
class OracleDynamics final : public TransitionModel {
public:
    explicit OracleDynamics(const Env& env) : TransitionModel(env) {}
    DynamicsKind kind() const override { return DynamicsKind::oracle; }
    std::vector<double> predict(const EvenState& s, ActionId a) const override;
    std::vector<double> log_probs(std::span<const StepRecord> batch) const override;
    double update(std::span<const StepRecord> batch) override;
};

// Laplace-smoothed counts: (count(s,a,s') + lambda) / (sum + lambda * |candidates|).
class TabularDynamics final : public TransitionModel {
public:
    TabularDynamics(const Env& env, double smoothing);
    DynamicsKind kind() const override { return DynamicsKind::tabular; }
    std::vector<double> predict(const EvenState& s, ActionId a) const override;
    double update(std::span<const StepRecord> batch) override;
    void observe(const StepRecord& rec);

private:
    double smoothing_;
    std::map<std::pair<EvenState, int>, std::vector<double>> counts_;
};

// MLP on [encode(s), one_hot(a)] producing candidate logits; trained by
// maximum likelihood with its own Adam optimizer.
class NeuralDynamics final : public TransitionModel {
public:
    NeuralDynamics(const Env& env, const std::vector<int>& hidden, nn::Activation act, double lr, Rng& init_rng);
    DynamicsKind kind() const override { return DynamicsKind::neural; }
    std::vector<double> predict(const EvenState& s, ActionId a) const override;
    std::vector<double> log_probs(std::span<const StepRecord> batch) const override;
    double update(std::span<const StepRecord> batch) override;

    // Mean NLL recorded on a tape, differentiable w.r.t. the model parameters.
    ad::Var loss(ad::Tape& tape, std::span<const StepRecord> batch);
    std::vector<ad::Parameter*> parameters() { return net_.parameters(); }

    nn::TensorMap state_dict() const override;
    void load_state_dict(const nn::TensorMap& tensors) override;

private:
    ad::Tensor inputs(std::span<const StepRecord> batch) const;
    ad::Tensor inputs_for(const EvenState& s, ActionId a) const;
    ad::Mask masks(std::span<const StepRecord> batch) const;

    nn::Mlp net_;
    nn::Adam adam_;
};

struct DynamicsConfig {
    DynamicsKind kind = DynamicsKind::neural;
    std::vector<int> hidden{256, 256};
    nn::Activation activation = nn::Activation::leaky_relu;
    double lr = 1e-4;
    double smoothing = 0.1;
};

std::unique_ptr<TransitionModel> make_dynamics(const Env& env, const DynamicsConfig& cfg, Rng& init_rng);

// Fixed-capacity FIFO of step records. Eviction is strictly oldest-first and
// sampling is uniform with replacement over the stored records.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    // Throws std::invalid_argument on an empty or non-chaining trajectory.
    void push(const Trajectory& t);
    std::vector<StepRecord> sample(std::size_t k, Rng& rng) const;

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    // Records oldest first.
    std::vector<StepRecord> contents() const;
    std::vector<std::uint64_t> trajectory_ids() const;

    // One record per line: "<traj_id> <s> <a> <s_next> <terminal> <reward>",
    // states in format_state() encoding, reward "-" when not terminal.
    void dump(const std::string& path) const;

private:
    const StepRecord& at(std::size_t i) const;  // i-th oldest

    std::size_t capacity_;
    std::vector<StepRecord> ring_;
    std::vector<std::uint64_t> traj_;
    std::size_t head_ = 0;  // next write position
    std::size_t size_ = 0;
    std::uint64_t next_traj_ = 0;
};

}  // namespace sgfn

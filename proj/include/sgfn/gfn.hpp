#pragma once

// GFlowNet quantities: forward policy pi(a|s), backward policy over parents,
// log state flow log F(s) and log Z, in tabular or neural form.

#include "sgfn/autodiff.hpp"
#include "sgfn/env.hpp"
#include "sgfn/nn.hpp"

#include <memory>
#include <span>
#include <vector>

namespace sgfn {

enum class ParamKind { tabular, neural };

std::string to_string(ParamKind k);
ParamKind parse_param_kind(const std::string& s);

struct GfnConfig {
    ParamKind kind = ParamKind::tabular;
    std::vector<int> hidden{256, 256};
    nn::Activation activation = nn::Activation::leaky_relu;
    double reward_exponent = 1.0;
    bool learned_backward = true;
};

// Per-state head outputs recorded on a tape, one row per input state.
struct Heads {
    ad::Var fwd_logits;  // [N x num_actions]
    ad::Var bwd_logits;  // [N x num_backward_slots]
    ad::Var log_flow;    // [N x 1], raw head output (terminal clamp applied by callers)
};

class GfnModel {
public:
    GfnModel(const Env& env, GfnConfig cfg, Rng& init_rng);

    GfnModel(const GfnModel&) = delete;
    GfnModel& operator=(const GfnModel&) = delete;

    Heads heads(ad::Tape& tape, std::span<const EvenState> states);
    ad::Var log_z(ad::Tape& tape) { return tape.param(log_z_); }

    // Inference.
    ad::Tensor forward_logits(std::span<const EvenState> states) const;
    // Length num_actions(); zero outside actions(s).
    std::vector<double> forward_dist(const EvenState& s) const;
    // Probabilities aligned with env.parents(s_next) (odd view) or
    // env.even_parents(s_next) (even view).
    std::vector<double> backward_dist(const EvenState& s_next, ParentView view) const;
    double log_flow(const EvenState& s) const;
    double log_z() const { return log_z_.value(0, 0); }
    // beta * log R(x): the terminal flow is pinned, never learned.
    double terminal_log_flow(const EvenState& x) const;

    ad::Parameter& log_z_param() { return log_z_; }
    // Everything except logZ.
    std::vector<ad::Parameter*> network_parameters();

    nn::TensorMap state_dict() const;
    void load_state_dict(const nn::TensorMap& tensors);

    const Env& env() const { return *env_; }
    const GfnConfig& config() const { return cfg_; }
    double beta() const { return cfg_.reward_exponent; }

    // Tabular only: direct access to a state's stored logits / flow, used to
    // hand-set parameters in tests.
    ad::Parameter& forward_table() { return fwd_table_; }
    ad::Parameter& backward_table() { return bwd_table_; }
    ad::Parameter& flow_table() { return flow_table_; }

private:
    ad::Tensor encode(std::span<const EvenState> states) const;
    std::vector<int> rows_of(std::span<const EvenState> states) const;
    ad::Tensor backward_logits(const EvenState& s) const;
    double raw_log_flow(const EvenState& s) const;

    const Env* env_;
    GfnConfig cfg_;
    int num_actions_;
    int num_slots_;
    ad::Parameter fwd_table_;
    ad::Parameter bwd_table_;
    ad::Parameter flow_table_;
    std::unique_ptr<nn::Mlp> trunk_;
    ad::Parameter log_z_;
};

// Backward-policy mask over slots and the slot of each listed parent.
struct ParentSlots {
    std::vector<int> slots;  // aligned with the parent list
    std::vector<bool> mask;  // num_backward_slots entries
};
ParentSlots parent_slots(const Env& env, const EvenState& s_next, ParentView view);

// Exploration mixture (1 - eps) * pi + eps * uniform over actions(s).
std::vector<double> behavior_dist(const GfnModel& model, const EvenState& s, double epsilon);

Trajectory sample_trajectory(const GfnModel& model, const Env& env, double epsilon, Rng& rng);
// M rollouts advanced in lockstep so each step is one batched policy call.
std::vector<Trajectory> sample_trajectories(const GfnModel& model, const Env& env, int count, double epsilon,
                                            Rng& rng);

int sample_index(std::span<const double> probs, Rng& rng);

}  // namespace sgfn

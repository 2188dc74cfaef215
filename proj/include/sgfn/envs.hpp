#pragma once

// Built-in environments.

#include "sgfn/env.hpp"

#include <map>

namespace sgfn {

// Odd parents of s_next found by scanning the kernels of its even parents.
std::vector<OddState> parents_from_kernel(const Env& env, const EvenState& s_next);

// Two-action toy: from s0, action a_i lands on terminal s_i with probability
// 1 - alpha/2 and on the other terminal with alpha/2. Rewards R(s1)=1,
// R(s2)=2. With alpha=0.5 the kernel is 0.75/0.25.
class Figure1Toy final : public Env {
public:
    explicit Figure1Toy(double alpha = 0.5);

    EnvKind kind() const override { return EnvKind::figure1; }
    std::string name() const override { return "figure1"; }
    std::string fingerprint() const override;
    EvenState initial() const override { return {}; }
    int num_actions() const override { return 2; }
    std::vector<ActionId> actions(const EvenState& s) const override;
    std::vector<Outcome> kernel_support(const EvenState& s, ActionId a) const override;
    std::vector<OddState> parents(const EvenState& s_next) const override;
    double reward(const EvenState& x) const override;
    EvenState intended_outcome(const EvenState& s, ActionId a) const override;
    std::optional<ActionId> intended_action(const EvenState& s, const EvenState& s_next) const override;
    std::vector<EvenState> even_parents(const EvenState& s_next) const override;
    int num_backward_slots() const override { return 2; }
    int backward_slot(const OddState& parent, const EvenState& child) const override;
    int encoding_size() const override { return 3; }
    void encode(const EvenState& s, std::span<double> out) const override;
    int horizon() const override { return 1; }
    bool enumerable() const override { return true; }
    std::size_t num_even_states() const override { return 3; }
    std::size_t index(const EvenState& s) const override;
    EvenState state_at(std::size_t idx) const override;
    int num_modes() const override { return 2; }
    std::vector<int> modes_hit(const EvenState& x, int delta) const override;
    int object_sites() const override { return 1; }
    int site_cardinality(int) const override { return 2; }
    std::vector<int> object_of(const EvenState& x) const override;
    std::optional<EvenState> terminal_of(const std::vector<int>& object) const override;

    static EvenState terminal(int which) { return EvenState{{which}, true}; }

private:
    double alpha_;
};

// ndim-dimensional grid of side H. Actions 0..ndim-1 increment a coordinate,
// action ndim stops. Slip noise replaces the chosen action, with probability
// alpha, by one drawn uniformly from the valid movement actions (plus stop
// when stop_noisy).
class HyperGrid final : public Env {
public:
    explicit HyperGrid(const EnvSpec& spec);

    EnvKind kind() const override { return EnvKind::hypergrid; }
    std::string name() const override;
    std::string fingerprint() const override;
    EvenState initial() const override;
    int num_actions() const override { return ndim_ + 1; }
    std::vector<ActionId> actions(const EvenState& s) const override;
    std::vector<Outcome> kernel_support(const EvenState& s, ActionId a) const override;
    std::vector<OddState> parents(const EvenState& s_next) const override;
    double reward(const EvenState& x) const override;
    EvenState intended_outcome(const EvenState& s, ActionId a) const override;
    std::optional<ActionId> intended_action(const EvenState& s, const EvenState& s_next) const override;
    std::vector<EvenState> even_parents(const EvenState& s_next) const override;
    int num_backward_slots() const override { return (ndim_ + 1) * (ndim_ + 1); }
    int backward_slot(const OddState& parent, const EvenState& child) const override;
    int encoding_size() const override { return ndim_ * H_ + 1; }
    void encode(const EvenState& s, std::span<double> out) const override;
    int horizon() const override { return ndim_ * (H_ - 1) + 1; }
    bool enumerable() const override { return enumerable_; }
    std::size_t num_even_states() const override { return 2 * cells_; }
    std::size_t index(const EvenState& s) const override;
    EvenState state_at(std::size_t idx) const override;
    int num_modes() const override { return 1 << ndim_; }
    std::vector<int> modes_hit(const EvenState& x, int delta) const override;
    int object_sites() const override { return ndim_; }
    int site_cardinality(int) const override { return H_; }
    std::vector<int> object_of(const EvenState& x) const override { return x.payload; }
    std::optional<EvenState> terminal_of(const std::vector<int>& object) const override;

    int side() const { return H_; }
    int ndim() const { return ndim_; }
    ActionId stop() const { return ActionId{ndim_}; }

private:
    std::vector<ActionId> noise_set(const EvenState& s) const;
    int offset_dim(const EvenState& parent, const EvenState& child) const;

    int H_;
    int ndim_;
    double alpha_;
    double R0_, R1_, R2_;
    bool stop_noisy_;
    std::size_t cells_ = 0;
    bool enumerable_ = false;
};

// Autoregressive bit sequences: append one k-bit word per step until n bits.
// Token noise replaces the chosen word, with probability alpha, by a uniform
// word. R(x) = exp(-min_y d(x, y)) over the mode set, d = bit edit distance.
class BitSeq final : public Env {
public:
    explicit BitSeq(const EnvSpec& spec);

    EnvKind kind() const override { return EnvKind::bitseq; }
    std::string name() const override;
    std::string fingerprint() const override;
    EvenState initial() const override { return {}; }
    int num_actions() const override { return vocab_; }
    std::vector<ActionId> actions(const EvenState& s) const override;
    std::vector<Outcome> kernel_support(const EvenState& s, ActionId a) const override;
    std::vector<OddState> parents(const EvenState& s_next) const override;
    double reward(const EvenState& x) const override;
    EvenState intended_outcome(const EvenState& s, ActionId a) const override;
    std::optional<ActionId> intended_action(const EvenState& s, const EvenState& s_next) const override;
    std::vector<EvenState> even_parents(const EvenState& s_next) const override;
    int num_backward_slots() const override { return vocab_; }
    int backward_slot(const OddState& parent, const EvenState& child) const override;
    int encoding_size() const override { return length_ * vocab_; }
    void encode(const EvenState& s, std::span<double> out) const override;
    int horizon() const override { return length_; }
    bool enumerable() const override { return enumerable_; }
    std::size_t num_even_states() const override { return total_states_; }
    std::size_t index(const EvenState& s) const override;
    EvenState state_at(std::size_t idx) const override;
    int num_modes() const override { return static_cast<int>(modes_.size()); }
    std::vector<int> modes_hit(const EvenState& x, int delta) const override;
    int object_sites() const override { return length_; }
    int site_cardinality(int) const override { return vocab_; }
    std::vector<int> object_of(const EvenState& x) const override { return x.payload; }
    std::optional<EvenState> terminal_of(const std::vector<int>& object) const override;

    std::vector<int> to_bits(const std::vector<int>& tokens) const;
    const std::vector<std::vector<int>>& modes() const { return modes_; }
    int length() const { return length_; }
    int vocab() const { return vocab_; }

private:
    int distance_to_modes(const std::vector<int>& bits) const;
    std::size_t terminal_rank(const EvenState& x) const;

    int n_;
    int k_;
    int vocab_;
    int length_;
    double alpha_;
    std::vector<std::vector<int>> modes_;
    std::vector<std::size_t> level_offset_;
    std::size_t total_states_ = 0;
    bool enumerable_ = false;
    std::vector<double> reward_cache_;  // by terminal rank, when enumerable
};

// Fixed-length sequences read from a reward table. The DAG is the prefix trie
// of the listed objects; actions at a node are its child symbols and slip
// noise picks a uniform child.
class ExternalRewardEnv final : public Env {
public:
    explicit ExternalRewardEnv(const EnvSpec& spec);

    EnvKind kind() const override { return EnvKind::external; }
    std::string name() const override { return "external"; }
    std::string fingerprint() const override;
    EvenState initial() const override { return {}; }
    int num_actions() const override { return static_cast<int>(alphabet_.size()); }
    std::vector<ActionId> actions(const EvenState& s) const override;
    std::vector<Outcome> kernel_support(const EvenState& s, ActionId a) const override;
    std::vector<OddState> parents(const EvenState& s_next) const override;
    double reward(const EvenState& x) const override;
    EvenState intended_outcome(const EvenState& s, ActionId a) const override;
    std::optional<ActionId> intended_action(const EvenState& s, const EvenState& s_next) const override;
    std::vector<EvenState> even_parents(const EvenState& s_next) const override;
    int num_backward_slots() const override { return num_actions(); }
    int backward_slot(const OddState& parent, const EvenState& child) const override;
    int encoding_size() const override { return length_ * num_actions(); }
    void encode(const EvenState& s, std::span<double> out) const override;
    int horizon() const override { return length_; }
    bool enumerable() const override { return true; }
    std::size_t num_even_states() const override { return nodes_.size(); }
    std::size_t index(const EvenState& s) const override;
    EvenState state_at(std::size_t idx) const override { return nodes_.at(idx); }
    int num_modes() const override { return static_cast<int>(mode_objects_.size()); }
    std::vector<int> modes_hit(const EvenState& x, int delta) const override;
    int object_sites() const override { return length_; }
    int site_cardinality(int) const override { return num_actions(); }
    std::vector<int> object_of(const EvenState& x) const override { return x.payload; }
    std::optional<EvenState> terminal_of(const std::vector<int>& object) const override;

    const std::string& alphabet() const { return alphabet_; }

private:
    std::vector<ActionId> children(const EvenState& s) const;

    std::string path_;
    double alpha_;
    int length_ = 0;
    std::string alphabet_;
    std::map<std::vector<int>, double> rewards_;
    std::vector<EvenState> nodes_;
    std::map<EvenState, std::size_t> node_index_;
    std::vector<std::vector<int>> mode_objects_;
};

}  // namespace sgfn

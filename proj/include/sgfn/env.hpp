#pragma once

// Stochastic-DAG environments in even/odd form.
//
// An even state is an ordinary environment state. Choosing action a at even
// state s moves deterministically to the odd state (s, a); the environment
// kernel then draws the next even state s' from P(. | s, a). Every built-in
// environment has a strictly increasing potential (coordinate sum, sequence
// length) so trajectories are finite.

#include "sgfn/rng.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sgfn {

struct ActionId {
    int index = 0;
    auto operator<=>(const ActionId&) const = default;
};

struct EvenState {
    std::vector<int> payload;  // grid coordinates or token sequence
    bool terminal = false;
    auto operator<=>(const EvenState&) const = default;
};

struct OddState {
    EvenState even;
    ActionId action;
    auto operator<=>(const OddState&) const = default;
};

struct Outcome {
    EvenState next;
    double prob = 0.0;
};

struct StepRecord {
    EvenState s;
    ActionId a;
    EvenState s_next;
    bool terminal = false;
    double reward = 0.0;  // meaningful only when terminal
};

struct Trajectory {
    std::vector<StepRecord> steps;
    const EvenState& terminal_state() const { return steps.back().s_next; }
};

// Which parent structure a backward policy ranges over: odd parents (s, a)
// for the stochastic objectives, or even parents s for the classic ones,
// which treat every observed s -> s' as a deterministic edge.
enum class ParentView { odd, even };

enum class EnvKind { figure1, hypergrid, bitseq, external };

std::string to_string(EnvKind k);
EnvKind parse_env_kind(const std::string& s);

struct EnvSpec {
    EnvKind kind = EnvKind::figure1;
    int H = 8;
    int ndim = 2;
    int n = 16;
    int k = 4;
    double alpha = 0.5;
    double R0 = 0.001;
    double R1 = 0.5;
    double R2 = 2.0;
    int num_modes = 4;
    std::uint64_t mode_seed = 0;
    std::vector<std::vector<int>> mode_set;  // explicit bit sequences; generated from mode_seed when empty
    bool stop_noisy = false;
    std::string reward_file;
    double mode_threshold = 0.0;  // external env: rewards >= threshold count as modes
    std::size_t enum_cap = 2'000'000;

    int vocab_size() const { return 1 << k; }
    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Dense enumeration of an environment, evens in topological order. Odd
// states are listed right after their even parent, so the concatenated
// sequence even, its odds, next even, ... is topologically ordered too.
struct StateGraph {
    std::vector<EvenState> evens;
    std::vector<OddState> odds;
    std::vector<std::size_t> odd_begin;  // odds of evens[i] are [odd_begin[i], odd_begin[i+1])
};

class Env {
public:
    virtual ~Env() = default;

    virtual EnvKind kind() const = 0;
    virtual std::string name() const = 0;
    // Stable identifier of the environment and its parameters.
    virtual std::string fingerprint() const = 0;

    virtual EvenState initial() const = 0;
    virtual int num_actions() const = 0;
    virtual std::vector<ActionId> actions(const EvenState& s) const = 0;
    virtual std::vector<Outcome> kernel_support(const EvenState& s, ActionId a) const = 0;
    virtual std::vector<OddState> parents(const EvenState& s_next) const = 0;
    virtual double reward(const EvenState& x) const = 0;

    // Noise-free outcome of a at s.
    virtual EvenState intended_outcome(const EvenState& s, ActionId a) const = 0;
    // The action whose noise-free outcome from s is s_next, if any.
    virtual std::optional<ActionId> intended_action(const EvenState& s, const EvenState& s_next) const = 0;
    // Even parents of s_next under the deterministic view.
    virtual std::vector<EvenState> even_parents(const EvenState& s_next) const = 0;

    // Backward-policy slots. A fixed-width logit vector covers every
    // parent kind; each parent of a given child maps to a distinct slot.
    virtual int num_backward_slots() const = 0;
    virtual int backward_slot(const OddState& parent, const EvenState& child) const = 0;

    // One-hot style input encoding for neural heads.
    virtual int encoding_size() const = 0;
    virtual void encode(const EvenState& s, std::span<double> out) const = 0;

    // Upper bound on trajectory length.
    virtual int horizon() const = 0;

    // Dense indexing, available when the environment is enumerable.
    virtual bool enumerable() const = 0;
    virtual std::size_t num_even_states() const = 0;
    virtual std::size_t index(const EvenState& s) const = 0;
    virtual EvenState state_at(std::size_t idx) const = 0;

    // Mode bookkeeping: number of defined modes and the modes a terminal hits.
    virtual int num_modes() const = 0;
    virtual std::vector<int> modes_hit(const EvenState& x, int delta) const = 0;

    // Complete-object view used by the MCMC baseline: objects are vectors of
    // `object_sites()` entries, entry i taking values in [0, site_cardinality(i)).
    virtual int object_sites() const = 0;
    virtual int site_cardinality(int site) const = 0;
    virtual std::vector<int> object_of(const EvenState& x) const = 0;
    // Terminal state of an object, or nullopt when the object has no reward
    // (only possible for external reward tables).
    virtual std::optional<EvenState> terminal_of(const std::vector<int>& object) const = 0;

    // ---- derived helpers (non-virtual) ----

    StepRecord step(const EvenState& s, ActionId a, Rng& rng) const;
    bool valid_action(const EvenState& s, ActionId a) const;
    // Even parent p of child in the deterministic view takes the slot of the
    // odd parent (p, a*) with a* the intended action, so at alpha = 0 both
    // views read the same logits.
    int even_backward_slot(const EvenState& parent, const EvenState& child) const;
    std::vector<bool> action_mask(const EvenState& s) const;
    StateGraph enumerate_states() const;
    std::vector<EvenState> terminals() const;
    std::string encode_state(const EvenState& s) const;
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);

// Levenshtein distance between two sequences.
int edit_distance(std::span<const int> a, std::span<const int> b);

std::string format_state(const EvenState& s);
EvenState parse_state(const std::string& text);

}  // namespace sgfn

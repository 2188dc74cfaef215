#pragma once

// Exact and empirical evaluation: the terminating distribution by forward DP
// over the enumerated graph, L1 error against R^beta / Z, mode discovery and
// top-k reward statistics.

#include "sgfn/env.hpp"
#include "sgfn/gfn.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sgfn {

// Aligned with Env::terminals().
struct TerminatingDistribution {
    std::vector<EvenState> terminals;
    std::vector<double> probs;

    double at(const EvenState& x) const;
    double total() const;
};

// Forward policy as a callback: distribution over num_actions() slots.
using PolicyFn = std::function<std::vector<double>(const EvenState&)>;

enum class L1Variant { mean, sum };
std::string to_string(L1Variant v);
L1Variant parse_l1_variant(const std::string& s);

// Caches the enumerated graph so repeated evaluation only costs the DP.
class ExactEvaluator {
public:
    // Throws NotEnumerableError when the env exceeds its cap.
    ExactEvaluator(const Env& env, double beta);

    // Mass flows s -> (s,a) by the policy and (s,a) -> s' by the true kernel.
    TerminatingDistribution terminating(const GfnModel& model) const;
    TerminatingDistribution terminating(const PolicyFn& policy) const;

    // p(x) = R(x)^beta / sum R^beta over terminals.
    const std::vector<double>& target() const { return target_; }
    const std::vector<EvenState>& terminals() const { return terminals_; }
    std::optional<std::size_t> terminal_position(const EvenState& x) const;
    double log_partition() const { return log_z_; }

private:
    TerminatingDistribution run(const std::vector<std::vector<double>>& policy) const;

    const Env* env_;
    StateGraph graph_;
    std::vector<EvenState> terminals_;
    std::vector<long> terminal_pos_;  // env index -> position in terminals_, or -1
    std::vector<double> target_;
    double log_z_ = 0.0;
};

TerminatingDistribution exact_terminating_distribution(const Env& env, const GfnModel& model);

// (1/|X|) sum |p - pi| (mean) or sum |p - pi| (sum).
double l1_error(std::span<const double> pi, std::span<const double> target, L1Variant variant = L1Variant::mean);
double l1_error(const TerminatingDistribution& pi, const Env& env, double beta,
                L1Variant variant = L1Variant::mean);

// Discovered-mode set with the iteration of each first discovery.
class ModeTracker {
public:
    explicit ModeTracker(int num_modes, int delta = 0);

    // Returns the number of newly discovered modes.
    int observe(const Env& env, const EvenState& x, std::int64_t iteration);
    int count() const { return count_; }
    int num_modes() const { return static_cast<int>(found_at_.size()); }
    // -1 for undiscovered modes.
    const std::vector<std::int64_t>& discovered_at() const { return found_at_; }

private:
    std::vector<std::int64_t> found_at_;
    int count_ = 0;
    int delta_;
};

// Mean and median of the k largest values. Throws std::invalid_argument if
// fewer than k values are given.
std::pair<double, double> topk_stats(std::span<const double> rewards, std::size_t k);

// The most recent `capacity` sampled terminals: their rewards and, for
// enumerable envs, an empirical terminating distribution.
class SampleWindow {
public:
    SampleWindow(std::size_t capacity, const ExactEvaluator* exact);

    void push(const EvenState& x, double reward);
    std::size_t size() const { return rewards_.size(); }
    // Empty window or no enumeration -> nullopt.
    std::optional<std::vector<double>> empirical() const;
    std::vector<double> rewards() const { return {rewards_.begin(), rewards_.end()}; }

private:
    std::size_t capacity_;
    const ExactEvaluator* exact_;
    std::deque<double> rewards_;
    std::deque<long> positions_;
    std::vector<std::uint64_t> counts_;
};

}  // namespace sgfn

#pragma once

// Single-site Metropolis-Hastings over complete objects. The proposal picks a
// site uniformly and redraws its value uniformly (the current value included),
// so it is symmetric and the acceptance ratio is min(1, R(x')^beta / R(x)^beta).
// Slip noise plays no part: the chain targets R^beta directly.

#include "sgfn/env.hpp"
#include "sgfn/eval.hpp"
#include "sgfn/trainer.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace sgfn {

struct McmcConfig {
    int chains = 16;
    std::int64_t steps = 1000;  // per chain
    double reward_exponent = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct McmcSample {
    int chain = 0;
    std::int64_t step = 0;
    EvenState x;
    double reward = 0.0;
    bool accepted = false;
};

// Runs each chain to completion in turn and emits its current state after
// every step, chain-major.
std::vector<McmcSample> mh_run(const Env& env, const McmcConfig& cfg);

// Chains advanced round-robin, one MH step charged as one sample.
class McmcSampler {
public:
    McmcSampler(const Env& env, const McmcConfig& cfg);

    // Advances `count` steps spread round-robin over the chains.
    std::vector<McmcSample> advance(std::int64_t count);
    // One MH step of a single chain.
    McmcSample step(int chain);
    std::uint64_t proposals() const { return proposals_; }
    std::uint64_t acceptances() const { return acceptances_; }

private:
    struct Chain {
        Rng rng;
        std::vector<int> object;
        EvenState x;
        double log_r = 0.0;
        std::int64_t steps = 0;
    };
    const Env* env_;
    McmcConfig cfg_;
    std::vector<Chain> chains_;
    int next_ = 0;
    std::uint64_t proposals_ = 0;
    std::uint64_t acceptances_ = 0;
};

// Same metrics stream as train(): one tick per eval cadence, where an
// "iteration" is `per_iteration` MH steps so x-axes line up with rollouts.
std::vector<MetricsRecord> mcmc_metrics(const Env& env, const McmcConfig& mcfg, const TrainConfig& tcfg,
                                        const MetricsSink& sink = {});

}  // namespace sgfn

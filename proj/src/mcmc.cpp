#include "sgfn/mcmc.hpp"

#include "sgfn/errors.hpp"

#include <chrono>
#include <cmath>

namespace sgfn {

void McmcConfig::validate() const {
    if (chains < 1) {
        throw ConfigError("mcmc.chains: expected an integer >= 1");
    }
    if (steps < 1) {
        throw ConfigError("mcmc.steps: expected an integer >= 1");
    }
    if (!(reward_exponent > 0)) {
        throw ConfigError("train.reward_exponent: expected a positive real");
    }
}

McmcSampler::McmcSampler(const Env& env, const McmcConfig& cfg) : env_(&env), cfg_(cfg) {
    cfg_.validate();
    const int sites = env.object_sites();
    for (int c = 0; c < cfg_.chains; ++c) {
        Chain ch{make_stream(cfg_.seed, 1000 + static_cast<std::uint64_t>(c)), {}, {}, 0.0, 0};
        // Uniform start; objects without a reward (sparse external tables) are redrawn.
        for (int attempt = 0;; ++attempt) {
            ch.object.assign(static_cast<std::size_t>(sites), 0);
            for (int i = 0; i < sites; ++i) {
                ch.object[static_cast<std::size_t>(i)] = uniform_int(ch.rng, env.site_cardinality(i));
            }
            if (auto x = env.terminal_of(ch.object)) {
                ch.x = *x;
                break;
            }
            if (attempt > 1000000) {
                throw std::runtime_error("mcmc: could not draw a starting object with a reward");
            }
        }
        ch.log_r = cfg_.reward_exponent * std::log(env.reward(ch.x));
        chains_.push_back(std::move(ch));
    }
}

McmcSample McmcSampler::step(int c) {
    Chain& ch = chains_[static_cast<std::size_t>(c)];
    const int site = uniform_int(ch.rng, env_->object_sites());
    std::vector<int> prop = ch.object;
    prop[static_cast<std::size_t>(site)] = uniform_int(ch.rng, env_->site_cardinality(site));
    const double u = uniform01(ch.rng);
    ++proposals_;
    bool accepted = false;
    if (auto x = env_->terminal_of(prop)) {
        const double log_r = cfg_.reward_exponent * std::log(env_->reward(*x));
        if (log_r >= ch.log_r || u < std::exp(log_r - ch.log_r)) {
            ch.object = std::move(prop);
            ch.x = std::move(*x);
            ch.log_r = log_r;
            accepted = true;
            ++acceptances_;
        }
    }
    ++ch.steps;
    return McmcSample{c, ch.steps, ch.x, env_->reward(ch.x), accepted};
}

std::vector<McmcSample> McmcSampler::advance(std::int64_t count) {
    std::vector<McmcSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        out.push_back(step(next_));
        next_ = (next_ + 1) % cfg_.chains;
    }
    return out;
}

std::vector<McmcSample> mh_run(const Env& env, const McmcConfig& cfg) {
    std::vector<McmcSample> out;
    out.reserve(static_cast<std::size_t>(cfg.chains * cfg.steps));
    McmcSampler sampler(env, cfg);
    // chain-major: run chain c alone for all its steps
    for (int c = 0; c < cfg.chains; ++c) {
        for (std::int64_t s = 0; s < cfg.steps; ++s) {
            out.push_back(sampler.step(c));
        }
    }
    return out;
}

std::vector<MetricsRecord> mcmc_metrics(const Env& env, const McmcConfig& mcfg, const TrainConfig& tcfg,
                                        const MetricsSink& sink) {
    const auto t0 = std::chrono::steady_clock::now();
    McmcSampler sampler(env, mcfg);
    std::unique_ptr<ExactEvaluator> exact;
    if (env.enumerable()) {
        exact = std::make_unique<ExactEvaluator>(env, mcfg.reward_exponent);
    }
    SampleWindow window(tcfg.eval_window, exact.get());
    ModeTracker tracker(env.num_modes(), tcfg.mode_delta);
    std::vector<MetricsRecord> out;
    for (std::int64_t it = 1; it <= tcfg.iterations; ++it) {
        for (const McmcSample& s : sampler.advance(tcfg.rollouts)) {
            window.push(s.x, s.reward);
            tracker.observe(env, s.x, it);
        }
        if (it % tcfg.eval_every == 0 || it == tcfg.iterations) {
            MetricsRecord rec;
            rec.iteration = it;
            rec.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            if (exact) {
                if (const auto emp = window.empirical()) {
                    rec.l1_empirical = l1_error(*emp, exact->target(), tcfg.l1_variant);
                }
            }
            rec.modes = tracker.count();
            if (window.size() >= tcfg.topk) {
                const auto r = window.rewards();
                const auto [mean, median] = topk_stats(r, tcfg.topk);
                rec.top100_mean = mean;
                rec.top100_median = median;
            }
            rec.seed = mcfg.seed;
            rec.method = "mcmc";
            rec.env = env.fingerprint();
            out.push_back(rec);
            if (sink) {
                sink(rec);
            }
        }
    }
    return out;
}

}  // namespace sgfn

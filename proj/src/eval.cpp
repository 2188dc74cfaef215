#include "sgfn/eval.hpp"

#include "sgfn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sgfn {

double TerminatingDistribution::at(const EvenState& x) const {
    for (std::size_t i = 0; i < terminals.size(); ++i) {
        if (terminals[i] == x) {
            return probs[i];
        }
    }
    return 0.0;
}

double TerminatingDistribution::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

std::string to_string(L1Variant v) { return v == L1Variant::mean ? "mean" : "sum"; }

L1Variant parse_l1_variant(const std::string& s) {
    if (s == "mean") return L1Variant::mean;
    if (s == "sum") return L1Variant::sum;
    throw ConfigError("unknown L1 variant '" + s + "' (expected mean or sum)");
}

ExactEvaluator::ExactEvaluator(const Env& env, double beta) : env_(&env), graph_(env.enumerate_states()) {
    terminal_pos_.assign(graph_.evens.size(), -1);
    std::vector<double> log_r;
    for (std::size_t i = 0; i < graph_.evens.size(); ++i) {
        if (graph_.evens[i].terminal) {
            terminal_pos_[i] = static_cast<long>(terminals_.size());
            terminals_.push_back(graph_.evens[i]);
            log_r.push_back(beta * std::log(env.reward(graph_.evens[i])));
        }
    }
    // log-sum-exp keeps beta = 3 on wide reward ranges finite
    const double mx = *std::max_element(log_r.begin(), log_r.end());
    double z = 0.0;
    for (double v : log_r) {
        z += std::exp(v - mx);
    }
    log_z_ = mx + std::log(z);
    target_.reserve(log_r.size());
    for (double v : log_r) {
        target_.push_back(std::exp(v - log_z_));
    }
}

std::optional<std::size_t> ExactEvaluator::terminal_position(const EvenState& x) const {
    if (!x.terminal) {
        return std::nullopt;
    }
    const long p = terminal_pos_[env_->index(x)];
    if (p < 0) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(p);
}

TerminatingDistribution ExactEvaluator::run(const std::vector<std::vector<double>>& policy) const {
    std::vector<double> mass(graph_.evens.size(), 0.0);
    mass[env_->index(env_->initial())] = 1.0;
    TerminatingDistribution out;
    out.terminals = terminals_;
    out.probs.assign(terminals_.size(), 0.0);
    for (std::size_t i = 0; i < graph_.evens.size(); ++i) {
        const EvenState& s = graph_.evens[i];
        const double m = mass[i];
        if (s.terminal) {
            out.probs[static_cast<std::size_t>(terminal_pos_[i])] = m;
            continue;
        }
        if (m == 0.0) {
            continue;
        }
        const std::vector<double>& pi = policy[i];
        for (std::size_t o = graph_.odd_begin[i]; o < graph_.odd_begin[i + 1]; ++o) {
            const OddState& odd = graph_.odds[o];
            const double to_odd = m * pi[static_cast<std::size_t>(odd.action.index)];
            if (to_odd == 0.0) {
                continue;
            }
            for (const Outcome& oc : env_->kernel_support(s, odd.action)) {
                mass[env_->index(oc.next)] += to_odd * oc.prob;
            }
        }
    }
    return out;
}

TerminatingDistribution ExactEvaluator::terminating(const PolicyFn& policy) const {
    std::vector<std::vector<double>> table(graph_.evens.size());
    for (std::size_t i = 0; i < graph_.evens.size(); ++i) {
        if (!graph_.evens[i].terminal) {
            table[i] = policy(graph_.evens[i]);
        }
    }
    return run(table);
}

TerminatingDistribution ExactEvaluator::terminating(const GfnModel& model) const {
    // One batched head evaluation instead of a network call per state.
    std::vector<EvenState> interior;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < graph_.evens.size(); ++i) {
        if (!graph_.evens[i].terminal) {
            interior.push_back(graph_.evens[i]);
            where.push_back(i);
        }
    }
    const ad::Tensor logits = model.forward_logits(interior);
    std::vector<std::vector<double>> table(graph_.evens.size());
    const int A = env_->num_actions();
    for (std::size_t r = 0; r < interior.size(); ++r) {
        const auto mask = env_->action_mask(interior[r]);
        double mx = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            if (mask[static_cast<std::size_t>(a)]) {
                mx = std::max(mx, logits(static_cast<Eigen::Index>(r), a));
            }
        }
        std::vector<double> p(static_cast<std::size_t>(A), 0.0);
        double z = 0.0;
        for (int a = 0; a < A; ++a) {
            if (mask[static_cast<std::size_t>(a)]) {
                p[static_cast<std::size_t>(a)] = std::exp(logits(static_cast<Eigen::Index>(r), a) - mx);
                z += p[static_cast<std::size_t>(a)];
            }
        }
        for (double& v : p) {
            v /= z;
        }
        table[where[r]] = std::move(p);
    }
    return run(table);
}

TerminatingDistribution exact_terminating_distribution(const Env& env, const GfnModel& model) {
    return ExactEvaluator(env, model.beta()).terminating(model);
}

double l1_error(std::span<const double> pi, std::span<const double> target, L1Variant variant) {
    if (pi.size() != target.size() || pi.empty()) {
        throw std::invalid_argument("l1_error: distributions over " + std::to_string(pi.size()) + " and " +
                                    std::to_string(target.size()) + " terminals");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        s += std::abs(target[i] - pi[i]);
    }
    return variant == L1Variant::mean ? s / static_cast<double>(pi.size()) : s;
}

double l1_error(const TerminatingDistribution& pi, const Env& env, double beta, L1Variant variant) {
    const ExactEvaluator ev(env, beta);
    std::vector<double> aligned(ev.terminals().size(), 0.0);
    for (std::size_t i = 0; i < pi.terminals.size(); ++i) {
        if (const auto pos = ev.terminal_position(pi.terminals[i])) {
            aligned[*pos] = pi.probs[i];
        }
    }
    return l1_error(aligned, ev.target(), variant);
}

ModeTracker::ModeTracker(int num_modes, int delta)
    : found_at_(static_cast<std::size_t>(std::max(num_modes, 0)), -1), delta_(delta) {}

int ModeTracker::observe(const Env& env, const EvenState& x, std::int64_t iteration) {
    int fresh = 0;
    for (int m : env.modes_hit(x, delta_)) {
        auto& at = found_at_.at(static_cast<std::size_t>(m));
        if (at < 0) {
            at = iteration;
            ++count_;
            ++fresh;
        }
    }
    return fresh;
}

std::pair<double, double> topk_stats(std::span<const double> rewards, std::size_t k) {
    if (k == 0 || rewards.size() < k) {
        throw std::invalid_argument("topk_stats: need at least k=" + std::to_string(k) + " samples, have " +
                                    std::to_string(rewards.size()));
    }
    std::vector<double> v(rewards.begin(), rewards.end());
    std::partial_sort(v.begin(), v.begin() + static_cast<long>(k), v.end(), std::greater<>());
    v.resize(k);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(k);
    const double median = k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
    return {mean, median};
}

SampleWindow::SampleWindow(std::size_t capacity, const ExactEvaluator* exact)
    : capacity_(capacity), exact_(exact) {
    if (capacity_ == 0) {
        throw std::invalid_argument("sample window capacity must be positive");
    }
    if (exact_ != nullptr) {
        counts_.assign(exact_->terminals().size(), 0);
    }
}

void SampleWindow::push(const EvenState& x, double reward) {
    if (rewards_.size() == capacity_) {
        rewards_.pop_front();
        if (exact_ != nullptr) {
            --counts_[static_cast<std::size_t>(positions_.front())];
            positions_.pop_front();
        }
    }
    rewards_.push_back(reward);
    if (exact_ != nullptr) {
        const auto pos = exact_->terminal_position(x);
        if (!pos) {
            throw std::invalid_argument("sample window: " + format_state(x) + " is not a terminal state");
        }
        positions_.push_back(static_cast<long>(*pos));
        ++counts_[*pos];
    }
}

std::optional<std::vector<double>> SampleWindow::empirical() const {
    if (exact_ == nullptr || rewards_.empty()) {
        return std::nullopt;
    }
    std::vector<double> out(counts_.size());
    const auto n = static_cast<double>(rewards_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        out[i] = static_cast<double>(counts_[i]) / n;
    }
    return out;
}

}  // namespace sgfn

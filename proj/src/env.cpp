#include "sgfn/env.hpp"

#include "sgfn/envs.hpp"
#include "sgfn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sgfn {

std::string to_string(EnvKind k) {
    switch (k) {
        case EnvKind::figure1:
            return "figure1";
        case EnvKind::hypergrid:
            return "hypergrid";
        case EnvKind::bitseq:
            return "bitseq";
        case EnvKind::external:
            return "external";
    }
    return "?";
}

EnvKind parse_env_kind(const std::string& s) {
    if (s == "figure1") {
        return EnvKind::figure1;
    }
    if (s == "hypergrid") {
        return EnvKind::hypergrid;
    }
    if (s == "bitseq") {
        return EnvKind::bitseq;
    }
    if (s == "external") {
        return EnvKind::external;
    }
    throw ConfigError("env.kind: unknown environment '" + s + "' (expected figure1|hypergrid|bitseq|external)");
}

void EnvSpec::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ConfigError("env.alpha: must lie in [0, 1), got " + std::to_string(alpha));
    }
    if (kind == EnvKind::hypergrid) {
        if (H < 2) {
            throw ConfigError("env.H: grid side must be >= 2, got " + std::to_string(H));
        }
        if (ndim < 1) {
            throw ConfigError("env.ndim: must be >= 1, got " + std::to_string(ndim));
        }
        if (!(R0 > 0.0) || R1 < 0.0 || R2 < 0.0) {
            throw ConfigError("env.R0/R1/R2: need R0 > 0 and R1, R2 >= 0");
        }
    }
    if (kind == EnvKind::bitseq) {
        if (k < 1 || k > 16) {
            throw ConfigError("env.k: word size must be in [1, 16], got " + std::to_string(k));
        }
        if (n < 1 || n % k != 0) {
            throw ConfigError("env.n: sequence length must be a positive multiple of env.k");
        }
        if (num_modes < 1 && mode_set.empty()) {
            throw ConfigError("env.num_modes: must be >= 1");
        }
        for (const auto& m : mode_set) {
            if (static_cast<int>(m.size()) != n) {
                throw ConfigError("env.mode_set: every mode must have exactly env.n bits");
            }
        }
    }
    if (kind == EnvKind::external && reward_file.empty()) {
        throw ConfigError("env.reward_file: required for env.kind=external");
    }
}

StepRecord Env::step(const EvenState& s, ActionId a, Rng& rng) const {
    const auto support = kernel_support(s, a);
    double u = uniform01(rng);
    std::size_t pick = support.size() - 1;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (u < support[i].prob) {
            pick = i;
            break;
        }
        u -= support[i].prob;
    }
    StepRecord rec{s, a, support[pick].next, false, 0.0};
    if (rec.s_next.terminal) {
        rec.terminal = true;
        rec.reward = reward(rec.s_next);
    }
    return rec;
}

bool Env::valid_action(const EvenState& s, ActionId a) const {
    if (s.terminal) {
        return false;
    }
    const auto acts = actions(s);
    return std::find(acts.begin(), acts.end(), a) != acts.end();
}

int Env::even_backward_slot(const EvenState& parent, const EvenState& child) const {
    const auto a = intended_action(parent, child);
    if (!a) {
        throw UsageError(format_state(parent) + " is not an even parent of " + format_state(child));
    }
    return backward_slot(OddState{parent, *a}, child);
}

std::vector<bool> Env::action_mask(const EvenState& s) const {
    std::vector<bool> mask(static_cast<std::size_t>(num_actions()), false);
    if (!s.terminal) {
        for (ActionId a : actions(s)) {
            mask[static_cast<std::size_t>(a.index)] = true;
        }
    }
    return mask;
}

StateGraph Env::enumerate_states() const {
    if (!enumerable()) {
        throw NotEnumerableError(name() + " is not enumerable at this size (more than the state cap)");
    }
    StateGraph g;
    const std::size_t n = num_even_states();
    g.evens.reserve(n);
    g.odd_begin.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        EvenState s = state_at(i);
        g.odd_begin.push_back(g.odds.size());
        if (!s.terminal) {
            for (ActionId a : actions(s)) {
                g.odds.push_back(OddState{s, a});
            }
        }
        g.evens.push_back(std::move(s));
    }
    g.odd_begin.push_back(g.odds.size());
    return g;
}

std::vector<EvenState> Env::terminals() const {
    if (!enumerable()) {
        throw NotEnumerableError(name() + " is not enumerable at this size (more than the state cap)");
    }
    std::vector<EvenState> out;
    for (std::size_t i = 0; i < num_even_states(); ++i) {
        EvenState s = state_at(i);
        if (s.terminal) {
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::string Env::encode_state(const EvenState& s) const { return format_state(s); }

std::vector<OddState> parents_from_kernel(const Env& env, const EvenState& s_next) {
    std::vector<OddState> out;
    for (const EvenState& p : env.even_parents(s_next)) {
        for (ActionId a : env.actions(p)) {
            for (const Outcome& o : env.kernel_support(p, a)) {
                if (o.next == s_next && o.prob > 0.0) {
                    out.push_back(OddState{p, a});
                    break;
                }
            }
        }
    }
    return out;
}

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case EnvKind::figure1:
            return std::make_unique<Figure1Toy>(spec.alpha);
        case EnvKind::hypergrid:
            return std::make_unique<HyperGrid>(spec);
        case EnvKind::bitseq:
            return std::make_unique<BitSeq>(spec);
        case EnvKind::external:
            return std::make_unique<ExternalRewardEnv>(spec);
    }
    throw ConfigError("env.kind: unsupported");
}

int edit_distance(std::span<const int> a, std::span<const int> b) {
    std::vector<int> prev(b.size() + 1);
    std::vector<int> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = static_cast<int>(j);
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// "<t|n>:v0,v1,..." e.g. "n:0,1" for interior grid cell (0,1), "t:" for an
// empty terminal payload.
std::string format_state(const EvenState& s) {
    std::ostringstream os;
    os << (s.terminal ? "t:" : "n:");
    for (std::size_t i = 0; i < s.payload.size(); ++i) {
        os << (i ? "," : "") << s.payload[i];
    }
    return os.str();
}

EvenState parse_state(const std::string& text) {
    if (text.size() < 2 || (text[0] != 't' && text[0] != 'n') || text[1] != ':') {
        throw std::invalid_argument("bad state encoding '" + text + "'");
    }
    EvenState s;
    s.terminal = text[0] == 't';
    std::string body = text.substr(2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            throw std::invalid_argument("bad state encoding '" + text + "'");
        }
        s.payload.push_back(std::stoi(item));
    }
    return s;
}

}  // namespace sgfn

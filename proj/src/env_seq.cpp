#include "sgfn/envs.hpp"
#include "sgfn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sgfn {

// ---- BitSeq -----------------------------------------------------------------

namespace {

// Modes are seeded shuffles of a balanced bit string, kept distinct.
std::vector<std::vector<int>> generate_modes(int n, int count, std::uint64_t seed) {
    Rng rng = make_stream(seed, 0x6d6f646573ULL);
    std::vector<int> base(static_cast<std::size_t>(n), 0);
    std::fill(base.begin(), base.begin() + n / 2, 1);
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> modes;
    int attempts = 0;
    while (static_cast<int>(modes.size()) < count) {
        std::vector<int> m = base;
        std::shuffle(m.begin(), m.end(), rng);
        if (seen.insert(m).second) {
            modes.push_back(std::move(m));
        }
        if (++attempts > 1000 * count) {
            throw ConfigError("env.num_modes: cannot draw that many distinct modes of length " + std::to_string(n));
        }
    }
    return modes;
}

}  // namespace

BitSeq::BitSeq(const EnvSpec& spec)
    : n_(spec.n), k_(spec.k), vocab_(spec.vocab_size()), length_(spec.n / spec.k), alpha_(spec.alpha) {
    modes_ = spec.mode_set.empty() ? generate_modes(n_, spec.num_modes, spec.mode_seed) : spec.mode_set;
    double total = 0.0;
    double level = 1.0;
    for (int l = 0; l <= length_; ++l) {
        total += level;
        level *= vocab_;
    }
    enumerable_ = total <= static_cast<double>(spec.enum_cap);
    if (enumerable_) {
        std::size_t off = 0;
        std::size_t lv = 1;
        for (int l = 0; l <= length_; ++l) {
            level_offset_.push_back(off);
            off += lv;
            lv *= static_cast<std::size_t>(vocab_);
        }
        total_states_ = off;
        const std::size_t nterm = total_states_ - level_offset_.back();
        reward_cache_.resize(nterm);
        for (std::size_t r = 0; r < nterm; ++r) {
            const EvenState x = state_at(level_offset_.back() + r);
            reward_cache_[r] = std::exp(-static_cast<double>(distance_to_modes(to_bits(x.payload))));
        }
    }
}

std::string BitSeq::name() const { return "bitseq" + std::to_string(n_) + "k" + std::to_string(k_); }

std::string BitSeq::fingerprint() const {
    std::ostringstream os;
    os << "bitseq(n=" << n_ << ",k=" << k_ << ",alpha=" << alpha_ << ",modes=";
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        os << (m ? "|" : "");
        for (int b : modes_[m]) {
            os << b;
        }
    }
    os << ")";
    return os.str();
}

std::vector<ActionId> BitSeq::actions(const EvenState& s) const {
    if (s.terminal) {
        throw UsageError("bitseq: actions() queried at terminal state " + format_state(s));
    }
    std::vector<ActionId> out(static_cast<std::size_t>(vocab_));
    for (int w = 0; w < vocab_; ++w) {
        out[static_cast<std::size_t>(w)] = ActionId{w};
    }
    return out;
}

std::vector<Outcome> BitSeq::kernel_support(const EvenState& s, ActionId a) const {
    if (s.terminal || a.index < 0 || a.index >= vocab_) {
        throw UsageError("bitseq: invalid action " + std::to_string(a.index) + " at " + format_state(s));
    }
    if (alpha_ == 0.0) {
        return {Outcome{intended_outcome(s, a), 1.0}};
    }
    std::vector<Outcome> out;
    out.reserve(static_cast<std::size_t>(vocab_));
    const double slip = alpha_ / vocab_;
    for (int w = 0; w < vocab_; ++w) {
        out.push_back(Outcome{intended_outcome(s, ActionId{w}), (w == a.index ? 1.0 - alpha_ : 0.0) + slip});
    }
    return out;
}

std::vector<OddState> BitSeq::parents(const EvenState& s_next) const {
    if (s_next.payload.empty()) {
        throw UsageError("bitseq: parents() of the initial state");
    }
    EvenState prefix{std::vector<int>(s_next.payload.begin(), s_next.payload.end() - 1), false};
    if (alpha_ == 0.0) {
        return {OddState{prefix, ActionId{s_next.payload.back()}}};
    }
    std::vector<OddState> out;
    out.reserve(static_cast<std::size_t>(vocab_));
    for (int w = 0; w < vocab_; ++w) {
        out.push_back(OddState{prefix, ActionId{w}});
    }
    return out;
}

std::vector<int> BitSeq::to_bits(const std::vector<int>& tokens) const {
    std::vector<int> bits;
    bits.reserve(tokens.size() * static_cast<std::size_t>(k_));
    for (int t : tokens) {
        for (int b = k_ - 1; b >= 0; --b) {
            bits.push_back((t >> b) & 1);
        }
    }
    return bits;
}

int BitSeq::distance_to_modes(const std::vector<int>& bits) const {
    int best = std::numeric_limits<int>::max();
    for (const auto& m : modes_) {
        best = std::min(best, edit_distance(bits, m));
    }
    return best;
}

std::size_t BitSeq::terminal_rank(const EvenState& x) const {
    std::size_t v = 0;
    for (int t : x.payload) {
        v = v * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(t);
    }
    return v;
}

double BitSeq::reward(const EvenState& x) const {
    if (!x.terminal || static_cast<int>(x.payload.size()) != length_) {
        throw UsageError("bitseq: reward() of non-terminal state " + format_state(x));
    }
    if (!reward_cache_.empty()) {
        return reward_cache_[terminal_rank(x)];
    }
    return std::exp(-static_cast<double>(distance_to_modes(to_bits(x.payload))));
}

EvenState BitSeq::intended_outcome(const EvenState& s, ActionId a) const {
    EvenState out = s;
    out.payload.push_back(a.index);
    out.terminal = static_cast<int>(out.payload.size()) == length_;
    return out;
}

std::optional<ActionId> BitSeq::intended_action(const EvenState& s, const EvenState& s_next) const {
    if (s.terminal || s_next.payload.size() != s.payload.size() + 1 ||
        !std::equal(s.payload.begin(), s.payload.end(), s_next.payload.begin())) {
        return std::nullopt;
    }
    return ActionId{s_next.payload.back()};
}

std::vector<EvenState> BitSeq::even_parents(const EvenState& s_next) const {
    if (s_next.payload.empty()) {
        throw UsageError("bitseq: parents of the initial state");
    }
    return {EvenState{std::vector<int>(s_next.payload.begin(), s_next.payload.end() - 1), false}};
}

int BitSeq::backward_slot(const OddState& parent, const EvenState&) const { return parent.action.index; }

void BitSeq::encode(const EvenState& s, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t p = 0; p < s.payload.size(); ++p) {
        out[p * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(s.payload[p])] = 1.0;
    }
}

std::size_t BitSeq::index(const EvenState& s) const {
    if (!enumerable_) {
        throw NotEnumerableError(name() + " is not enumerable at this size (more than the state cap)");
    }
    std::size_t v = 0;
    for (int t : s.payload) {
        v = v * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(t);
    }
    return level_offset_[s.payload.size()] + v;
}

EvenState BitSeq::state_at(std::size_t idx) const {
    if (!enumerable_ || idx >= total_states_) {
        throw std::out_of_range("bitseq: state index out of range");
    }
    std::size_t len = 0;
    while (len + 1 < level_offset_.size() && level_offset_[len + 1] <= idx) {
        ++len;
    }
    std::size_t v = idx - level_offset_[len];
    EvenState s;
    s.payload.assign(len, 0);
    for (std::size_t p = len; p-- > 0;) {
        s.payload[p] = static_cast<int>(v % static_cast<std::size_t>(vocab_));
        v /= static_cast<std::size_t>(vocab_);
    }
    s.terminal = static_cast<int>(len) == length_;
    return s;
}

std::vector<int> BitSeq::modes_hit(const EvenState& x, int delta) const {
    std::vector<int> out;
    const auto bits = to_bits(x.payload);
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        if (edit_distance(bits, modes_[m]) <= delta) {
            out.push_back(static_cast<int>(m));
        }
    }
    return out;
}

std::optional<EvenState> BitSeq::terminal_of(const std::vector<int>& object) const {
    return EvenState{object, true};
}

// ---- ExternalRewardEnv --------------------------------------------------------

ExternalRewardEnv::ExternalRewardEnv(const EnvSpec& spec) : path_(spec.reward_file), alpha_(spec.alpha) {
    std::ifstream in(path_);
    if (!in) {
        throw ConfigError("env.reward_file: cannot open '" + path_ + "'");
    }
    std::vector<std::pair<std::string, double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string obj;
        std::string rtext;
        if (!(ls >> obj)) {
            continue;
        }
        std::string extra;
        if (!(ls >> rtext) || (ls >> extra)) {
            throw ConfigError(path_ + ":" + std::to_string(lineno) + ": expected '<object> <reward>'");
        }
        double r = 0.0;
        try {
            std::size_t used = 0;
            r = std::stod(rtext, &used);
            if (used != rtext.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw ConfigError(path_ + ":" + std::to_string(lineno) + ": reward '" + rtext + "' is not a number");
        }
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw ConfigError(path_ + ":" + std::to_string(lineno) + ": reward must be strictly positive");
        }
        if (length_ == 0) {
            length_ = static_cast<int>(obj.size());
        } else if (static_cast<int>(obj.size()) != length_) {
            throw ConfigError(path_ + ":" + std::to_string(lineno) + ": all objects must have the same length");
        }
        rows.emplace_back(obj, r);
    }
    if (rows.empty()) {
        throw ConfigError("env.reward_file: '" + path_ + "' lists no objects");
    }
    std::set<char> chars;
    for (const auto& [obj, r] : rows) {
        chars.insert(obj.begin(), obj.end());
    }
    alphabet_.assign(chars.begin(), chars.end());
    std::set<EvenState> nodes;
    for (const auto& [obj, r] : rows) {
        std::vector<int> tok;
        for (char c : obj) {
            tok.push_back(static_cast<int>(alphabet_.find(c)));
        }
        if (!rewards_.emplace(tok, r).second) {
            throw ConfigError("env.reward_file: duplicate object '" + obj + "'");
        }
        if (r >= spec.mode_threshold && spec.mode_threshold > 0.0) {
            mode_objects_.push_back(tok);
        }
        for (std::size_t l = 0; l <= tok.size(); ++l) {
            nodes.insert(EvenState{std::vector<int>(tok.begin(), tok.begin() + static_cast<long>(l)),
                                   static_cast<int>(l) == length_});
        }
    }
    // Level-major order keeps every edge pointing forward.
    nodes_.assign(nodes.begin(), nodes.end());
    std::stable_sort(nodes_.begin(), nodes_.end(),
                     [](const EvenState& a, const EvenState& b) { return a.payload.size() < b.payload.size(); });
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        node_index_.emplace(nodes_[i], i);
    }
}

std::string ExternalRewardEnv::fingerprint() const {
    std::ostringstream os;
    os << "external(file=" << path_ << ",objects=" << rewards_.size() << ",alpha=" << alpha_ << ")";
    return os.str();
}

std::vector<ActionId> ExternalRewardEnv::children(const EvenState& s) const {
    std::vector<ActionId> out;
    for (int c = 0; c < num_actions(); ++c) {
        EvenState child = s;
        child.payload.push_back(c);
        child.terminal = static_cast<int>(child.payload.size()) == length_;
        if (node_index_.count(child) != 0) {
            out.push_back(ActionId{c});
        }
    }
    return out;
}

std::vector<ActionId> ExternalRewardEnv::actions(const EvenState& s) const {
    if (s.terminal) {
        throw UsageError("external: actions() queried at terminal state " + format_state(s));
    }
    return children(s);
}

std::vector<Outcome> ExternalRewardEnv::kernel_support(const EvenState& s, ActionId a) const {
    const auto kids = actions(s);
    if (std::find(kids.begin(), kids.end(), a) == kids.end()) {
        throw UsageError("external: invalid action " + std::to_string(a.index) + " at " + format_state(s));
    }
    if (alpha_ == 0.0 || kids.size() == 1) {
        return {Outcome{intended_outcome(s, a), 1.0}};
    }
    std::vector<Outcome> out;
    const double m = static_cast<double>(kids.size());
    for (ActionId c : kids) {
        out.push_back(Outcome{intended_outcome(s, c), (c == a ? 1.0 - alpha_ : 0.0) + alpha_ / m});
    }
    return out;
}

std::vector<OddState> ExternalRewardEnv::parents(const EvenState& s_next) const {
    if (s_next.payload.empty()) {
        throw UsageError("external: parents() of the initial state");
    }
    return parents_from_kernel(*this, s_next);
}

double ExternalRewardEnv::reward(const EvenState& x) const {
    if (!x.terminal) {
        throw UsageError("external: reward() of non-terminal state " + format_state(x));
    }
    auto it = rewards_.find(x.payload);
    if (it == rewards_.end()) {
        throw UsageError("external: object " + format_state(x) + " is not in the reward table");
    }
    return it->second;
}

EvenState ExternalRewardEnv::intended_outcome(const EvenState& s, ActionId a) const {
    EvenState out = s;
    out.payload.push_back(a.index);
    out.terminal = static_cast<int>(out.payload.size()) == length_;
    return out;
}

std::optional<ActionId> ExternalRewardEnv::intended_action(const EvenState& s, const EvenState& s_next) const {
    if (s.terminal || s_next.payload.size() != s.payload.size() + 1 ||
        !std::equal(s.payload.begin(), s.payload.end(), s_next.payload.begin())) {
        return std::nullopt;
    }
    return ActionId{s_next.payload.back()};
}

std::vector<EvenState> ExternalRewardEnv::even_parents(const EvenState& s_next) const {
    if (s_next.payload.empty()) {
        throw UsageError("external: parents of the initial state");
    }
    return {EvenState{std::vector<int>(s_next.payload.begin(), s_next.payload.end() - 1), false}};
}

int ExternalRewardEnv::backward_slot(const OddState& parent, const EvenState&) const { return parent.action.index; }

void ExternalRewardEnv::encode(const EvenState& s, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t p = 0; p < s.payload.size(); ++p) {
        out[p * static_cast<std::size_t>(num_actions()) + static_cast<std::size_t>(s.payload[p])] = 1.0;
    }
}

std::size_t ExternalRewardEnv::index(const EvenState& s) const {
    auto it = node_index_.find(s);
    if (it == node_index_.end()) {
        throw UsageError("external: unknown state " + format_state(s));
    }
    return it->second;
}

std::vector<int> ExternalRewardEnv::modes_hit(const EvenState& x, int) const {
    for (std::size_t m = 0; m < mode_objects_.size(); ++m) {
        if (mode_objects_[m] == x.payload) {
            return {static_cast<int>(m)};
        }
    }
    return {};
}

std::optional<EvenState> ExternalRewardEnv::terminal_of(const std::vector<int>& object) const {
    if (rewards_.count(object) == 0) {
        return std::nullopt;
    }
    return EvenState{object, true};
}

}  // namespace sgfn

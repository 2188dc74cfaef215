#include "sgfn/envs.hpp"
#include "sgfn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sgfn {

// ---- Figure1Toy -------------------------------------------------------------

Figure1Toy::Figure1Toy(double alpha) : alpha_(alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ConfigError("env.alpha: must lie in [0, 1)");
    }
}

std::string Figure1Toy::fingerprint() const {
    std::ostringstream os;
    os << "figure1(alpha=" << alpha_ << ")";
    return os.str();
}

std::vector<ActionId> Figure1Toy::actions(const EvenState& s) const {
    if (s.terminal) {
        throw UsageError("figure1: actions() queried at terminal state " + format_state(s));
    }
    return {ActionId{0}, ActionId{1}};
}

std::vector<Outcome> Figure1Toy::kernel_support(const EvenState& s, ActionId a) const {
    if (!valid_action(s, a)) {
        throw UsageError("figure1: invalid action " + std::to_string(a.index) + " at " + format_state(s));
    }
    if (alpha_ == 0.0) {
        return {Outcome{terminal(a.index), 1.0}};
    }
    std::vector<Outcome> out;
    for (int w = 0; w < 2; ++w) {
        out.push_back(Outcome{terminal(w), (w == a.index ? 1.0 - alpha_ : 0.0) + alpha_ / 2.0});
    }
    return out;
}

std::vector<OddState> Figure1Toy::parents(const EvenState& s_next) const {
    if (!s_next.terminal) {
        throw UsageError("figure1: parents() of the initial state");
    }
    return parents_from_kernel(*this, s_next);
}

double Figure1Toy::reward(const EvenState& x) const {
    if (!x.terminal || x.payload.size() != 1) {
        throw UsageError("figure1: reward() of non-terminal state " + format_state(x));
    }
    return x.payload[0] == 0 ? 1.0 : 2.0;
}

EvenState Figure1Toy::intended_outcome(const EvenState& s, ActionId a) const {
    if (!valid_action(s, a)) {
        throw UsageError("figure1: invalid action");
    }
    return terminal(a.index);
}

std::optional<ActionId> Figure1Toy::intended_action(const EvenState& s, const EvenState& s_next) const {
    if (s.terminal || !s_next.terminal || s_next.payload.size() != 1) {
        return std::nullopt;
    }
    return ActionId{s_next.payload[0]};
}

std::vector<EvenState> Figure1Toy::even_parents(const EvenState& s_next) const {
    if (!s_next.terminal) {
        throw UsageError("figure1: parents of the initial state");
    }
    return {initial()};
}

int Figure1Toy::backward_slot(const OddState& parent, const EvenState&) const { return parent.action.index; }

void Figure1Toy::encode(const EvenState& s, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    out[index(s)] = 1.0;
}

std::size_t Figure1Toy::index(const EvenState& s) const {
    if (!s.terminal) {
        return 0;
    }
    return static_cast<std::size_t>(s.payload.at(0)) + 1;
}

EvenState Figure1Toy::state_at(std::size_t idx) const {
    if (idx == 0) {
        return initial();
    }
    if (idx > 2) {
        throw std::out_of_range("figure1: state index out of range");
    }
    return terminal(static_cast<int>(idx) - 1);
}

std::vector<int> Figure1Toy::modes_hit(const EvenState& x, int) const {
    if (!x.terminal) {
        return {};
    }
    return {x.payload.at(0)};
}

std::vector<int> Figure1Toy::object_of(const EvenState& x) const { return {x.payload.at(0)}; }

std::optional<EvenState> Figure1Toy::terminal_of(const std::vector<int>& object) const {
    return terminal(object.at(0));
}

// ---- HyperGrid --------------------------------------------------------------

HyperGrid::HyperGrid(const EnvSpec& spec)
    : H_(spec.H),
      ndim_(spec.ndim),
      alpha_(spec.alpha),
      R0_(spec.R0),
      R1_(spec.R1),
      R2_(spec.R2),
      stop_noisy_(spec.stop_noisy) {
    double cells = std::pow(static_cast<double>(H_), ndim_);
    enumerable_ = 2.0 * cells <= static_cast<double>(spec.enum_cap);
    if (cells < static_cast<double>(std::numeric_limits<std::size_t>::max() / 4)) {
        cells_ = static_cast<std::size_t>(cells);
    }
}

std::string HyperGrid::name() const { return "hypergrid" + std::to_string(H_); }

std::string HyperGrid::fingerprint() const {
    std::ostringstream os;
    os << "hypergrid(H=" << H_ << ",ndim=" << ndim_ << ",alpha=" << alpha_ << ",R=" << R0_ << "/" << R1_ << "/"
       << R2_ << ",stop_noisy=" << stop_noisy_ << ")";
    return os.str();
}

EvenState HyperGrid::initial() const { return EvenState{std::vector<int>(static_cast<std::size_t>(ndim_), 0), false}; }

std::vector<ActionId> HyperGrid::actions(const EvenState& s) const {
    if (s.terminal) {
        throw UsageError("hypergrid: actions() queried at terminal state " + format_state(s));
    }
    std::vector<ActionId> out;
    for (int i = 0; i < ndim_; ++i) {
        if (s.payload[static_cast<std::size_t>(i)] < H_ - 1) {
            out.push_back(ActionId{i});
        }
    }
    out.push_back(stop());
    return out;
}

std::vector<ActionId> HyperGrid::noise_set(const EvenState& s) const {
    std::vector<ActionId> out;
    for (int i = 0; i < ndim_; ++i) {
        if (s.payload[static_cast<std::size_t>(i)] < H_ - 1) {
            out.push_back(ActionId{i});
        }
    }
    if (stop_noisy_) {
        out.push_back(stop());
    }
    return out;
}

std::vector<Outcome> HyperGrid::kernel_support(const EvenState& s, ActionId a) const {
    if (!valid_action(s, a)) {
        throw UsageError("hypergrid: invalid action " + std::to_string(a.index) + " at " + format_state(s));
    }
    if (a == stop() && !stop_noisy_) {
        return {Outcome{intended_outcome(s, a), 1.0}};
    }
    const auto eligible = noise_set(s);
    const double m = static_cast<double>(eligible.size());
    std::vector<Outcome> out;
    for (ActionId e : eligible) {
        const double p = (e == a ? 1.0 - alpha_ : 0.0) + alpha_ / m;
        if (p > 0.0) {
            out.push_back(Outcome{intended_outcome(s, e), p});
        }
    }
    return out;
}

std::vector<OddState> HyperGrid::parents(const EvenState& s_next) const {
    if (s_next == initial()) {
        throw UsageError("hypergrid: parents() of the initial state");
    }
    return parents_from_kernel(*this, s_next);
}

double HyperGrid::reward(const EvenState& x) const {
    if (!x.terminal) {
        throw UsageError("hypergrid: reward() of non-terminal state " + format_state(x));
    }
    bool outer = true;
    bool band = true;
    for (int v : x.payload) {
        const double d = std::abs(static_cast<double>(v) / H_ - 0.5);
        outer = outer && (0.25 < d);
        band = band && (0.3 < d && d < 0.4);
    }
    return R0_ + (outer ? R1_ : 0.0) + (band ? R2_ : 0.0);
}

EvenState HyperGrid::intended_outcome(const EvenState& s, ActionId a) const {
    if (a == stop()) {
        return EvenState{s.payload, true};
    }
    EvenState out = s;
    out.payload[static_cast<std::size_t>(a.index)] += 1;
    return out;
}

std::optional<ActionId> HyperGrid::intended_action(const EvenState& s, const EvenState& s_next) const {
    if (s.terminal || s.payload.size() != s_next.payload.size()) {
        return std::nullopt;
    }
    if (s_next.terminal) {
        if (s_next.payload == s.payload) {
            return stop();
        }
        return std::nullopt;
    }
    int diff_dim = -1;
    for (int i = 0; i < ndim_; ++i) {
        const int d = s_next.payload[static_cast<std::size_t>(i)] - s.payload[static_cast<std::size_t>(i)];
        if (d == 0) {
            continue;
        }
        if (d != 1 || diff_dim >= 0) {
            return std::nullopt;
        }
        diff_dim = i;
    }
    if (diff_dim < 0) {
        return std::nullopt;
    }
    return ActionId{diff_dim};
}

std::vector<EvenState> HyperGrid::even_parents(const EvenState& s_next) const {
    if (s_next.terminal) {
        return {EvenState{s_next.payload, false}};
    }
    if (s_next == initial()) {
        throw UsageError("hypergrid: parents of the initial state");
    }
    std::vector<EvenState> out;
    for (int i = 0; i < ndim_; ++i) {
        if (s_next.payload[static_cast<std::size_t>(i)] > 0) {
            EvenState p = s_next;
            p.payload[static_cast<std::size_t>(i)] -= 1;
            out.push_back(std::move(p));
        }
    }
    return out;
}

int HyperGrid::backward_slot(const OddState& parent, const EvenState& child) const {
    if (child.terminal) {
        return ndim_ * (ndim_ + 1) + parent.action.index;
    }
    // (offset dim x action); the action range includes stop, which can slip into a move
    const int offset = offset_dim(parent.even, child);
    return offset * (ndim_ + 1) + parent.action.index;
}

int HyperGrid::offset_dim(const EvenState& parent, const EvenState& child) const {
    for (int i = 0; i < ndim_; ++i) {
        if (child.payload[static_cast<std::size_t>(i)] != parent.payload[static_cast<std::size_t>(i)]) {
            return i;
        }
    }
    throw UsageError("hypergrid: " + format_state(parent) + " is not a parent of " + format_state(child));
}

void HyperGrid::encode(const EvenState& s, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < ndim_; ++i) {
        out[static_cast<std::size_t>(i * H_ + s.payload[static_cast<std::size_t>(i)])] = 1.0;
    }
    out[static_cast<std::size_t>(ndim_ * H_)] = s.terminal ? 1.0 : 0.0;
}

std::size_t HyperGrid::index(const EvenState& s) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int i = 0; i < ndim_; ++i) {
        idx += static_cast<std::size_t>(s.payload[static_cast<std::size_t>(i)]) * stride;
        stride *= static_cast<std::size_t>(H_);
    }
    return s.terminal ? idx + cells_ : idx;
}

EvenState HyperGrid::state_at(std::size_t idx) const {
    if (idx >= 2 * cells_) {
        throw std::out_of_range("hypergrid: state index out of range");
    }
    EvenState s;
    s.terminal = idx >= cells_;
    std::size_t rem = idx % cells_;
    s.payload.resize(static_cast<std::size_t>(ndim_));
    for (int i = 0; i < ndim_; ++i) {
        s.payload[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::size_t>(H_));
        rem /= static_cast<std::size_t>(H_);
    }
    return s;
}

std::vector<int> HyperGrid::modes_hit(const EvenState& x, int) const {
    int corner = 0;
    for (int i = 0; i < ndim_; ++i) {
        const double u = static_cast<double>(x.payload[static_cast<std::size_t>(i)]) / H_;
        const double d = std::abs(u - 0.5);
        if (!(0.3 < d && d < 0.4)) {
            return {};
        }
        if (u > 0.5) {
            corner |= 1 << i;
        }
    }
    return {corner};
}

std::optional<EvenState> HyperGrid::terminal_of(const std::vector<int>& object) const {
    return EvenState{object, true};
}

}  // namespace sgfn

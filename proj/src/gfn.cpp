#include "sgfn/gfn.hpp"

#include "sgfn/errors.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sgfn {

std::string to_string(ParamKind k) { return k == ParamKind::tabular ? "tabular" : "neural"; }

ParamKind parse_param_kind(const std::string& s) {
    if (s == "tabular") {
        return ParamKind::tabular;
    }
    if (s == "neural") {
        return ParamKind::neural;
    }
    throw ConfigError("unknown parameterization '" + s + "' (expected tabular|neural)");
}

GfnModel::GfnModel(const Env& env, GfnConfig cfg, Rng& init_rng)
    : env_(&env),
      cfg_(std::move(cfg)),
      num_actions_(env.num_actions()),
      num_slots_(env.num_backward_slots()),
      log_z_("logZ", ad::Tensor::Zero(1, 1)) {
    if (!(cfg_.reward_exponent > 0.0)) {
        throw ConfigError("train.reward_exponent: must be > 0");
    }
    if (cfg_.kind == ParamKind::tabular) {
        if (!env.enumerable()) {
            throw ConfigError("tabular parameters need an enumerable environment; " + env.name() + " is too large");
        }
        const auto n = static_cast<Eigen::Index>(env.num_even_states());
        fwd_table_ = ad::Parameter("gfn.forward", ad::Tensor::Zero(n, num_actions_));
        bwd_table_ = ad::Parameter("gfn.backward", ad::Tensor::Zero(n, num_slots_));
        flow_table_ = ad::Parameter("gfn.flow", ad::Tensor::Zero(n, 1));
    } else {
        trunk_ = std::make_unique<nn::Mlp>("gfn.trunk", env.encoding_size(), cfg_.hidden,
                                           num_actions_ + num_slots_ + 1, cfg_.activation, init_rng);
    }
}

std::vector<ad::Parameter*> GfnModel::network_parameters() {
    if (cfg_.kind == ParamKind::tabular) {
        std::vector<ad::Parameter*> out{&fwd_table_, &flow_table_};
        if (cfg_.learned_backward) {
            out.push_back(&bwd_table_);
        }
        return out;
    }
    return trunk_->parameters();
}

ad::Tensor GfnModel::encode(std::span<const EvenState> states) const {
    ad::Tensor x(static_cast<Eigen::Index>(states.size()), env_->encoding_size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        env_->encode(states[i], std::span<double>(x.row(static_cast<Eigen::Index>(i)).data(),
                                                  static_cast<std::size_t>(x.cols())));
    }
    return x;
}

std::vector<int> GfnModel::rows_of(std::span<const EvenState> states) const {
    std::vector<int> rows(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        rows[i] = static_cast<int>(env_->index(states[i]));
    }
    return rows;
}

Heads GfnModel::heads(ad::Tape& tape, std::span<const EvenState> states) {
    const auto n = static_cast<Eigen::Index>(states.size());
    Heads h;
    if (cfg_.kind == ParamKind::tabular) {
        const auto rows = rows_of(states);
        h.fwd_logits = ad::gather_rows(tape.param(fwd_table_), rows);
        h.bwd_logits = cfg_.learned_backward ? ad::gather_rows(tape.param(bwd_table_), rows)
                                             : tape.constant(ad::Tensor::Zero(n, num_slots_));
        h.log_flow = ad::gather_rows(tape.param(flow_table_), rows);
        return h;
    }
    ad::Var out = trunk_->forward(tape, tape.constant(encode(states)));
    h.fwd_logits = ad::slice_cols(out, 0, num_actions_);
    h.bwd_logits = cfg_.learned_backward ? ad::slice_cols(out, num_actions_, num_slots_)
                                         : tape.constant(ad::Tensor::Zero(n, num_slots_));
    h.log_flow = ad::slice_cols(out, num_actions_ + num_slots_, 1);
    return h;
}

ad::Tensor GfnModel::forward_logits(std::span<const EvenState> states) const {
    if (cfg_.kind == ParamKind::tabular) {
        ad::Tensor out(static_cast<Eigen::Index>(states.size()), num_actions_);
        const auto rows = rows_of(states);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.row(static_cast<Eigen::Index>(i)) = fwd_table_.value.row(rows[i]);
        }
        return out;
    }
    return trunk_->forward(encode(states)).leftCols(num_actions_);
}

namespace {

std::vector<double> masked_softmax(const double* logits, const std::vector<bool>& mask) {
    std::vector<double> p(mask.size(), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            mx = std::max(mx, logits[j]);
        }
    }
    double z = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            p[j] = std::exp(logits[j] - mx);
            z += p[j];
        }
    }
    for (double& v : p) {
        v /= z;
    }
    return p;
}

}  // namespace

std::vector<double> GfnModel::forward_dist(const EvenState& s) const {
    if (s.terminal) {
        throw UsageError("forward_dist: terminal state " + format_state(s) + " has no actions");
    }
    const EvenState one[] = {s};
    const ad::Tensor logits = forward_logits(one);
    return masked_softmax(logits.data(), env_->action_mask(s));
}

ad::Tensor GfnModel::backward_logits(const EvenState& s) const {
    if (!cfg_.learned_backward) {
        return ad::Tensor::Zero(1, num_slots_);
    }
    if (cfg_.kind == ParamKind::tabular) {
        return bwd_table_.value.row(static_cast<Eigen::Index>(env_->index(s)));
    }
    const EvenState one[] = {s};
    return trunk_->forward(encode(one)).middleCols(num_actions_, num_slots_);
}

std::vector<double> GfnModel::backward_dist(const EvenState& s_next, ParentView view) const {
    if (s_next == env_->initial()) {
        throw UsageError("backward_dist: the initial state has no parents");
    }
    const ParentSlots ps = parent_slots(*env_, s_next, view);
    const ad::Tensor logits = backward_logits(s_next);
    const auto p = masked_softmax(logits.data(), ps.mask);
    std::vector<double> out;
    out.reserve(ps.slots.size());
    for (int slot : ps.slots) {
        out.push_back(p[static_cast<std::size_t>(slot)]);
    }
    return out;
}

double GfnModel::raw_log_flow(const EvenState& s) const {
    if (cfg_.kind == ParamKind::tabular) {
        return flow_table_.value(static_cast<Eigen::Index>(env_->index(s)), 0);
    }
    const EvenState one[] = {s};
    return trunk_->forward(encode(one))(0, num_actions_ + num_slots_);
}

double GfnModel::log_flow(const EvenState& s) const {
    return s.terminal ? terminal_log_flow(s) : raw_log_flow(s);
}

double GfnModel::terminal_log_flow(const EvenState& x) const { return cfg_.reward_exponent * std::log(env_->reward(x)); }

nn::TensorMap GfnModel::state_dict() const {
    nn::TensorMap out;
    out.emplace(log_z_.name, log_z_.value);
    if (cfg_.kind == ParamKind::tabular) {
        out.emplace(fwd_table_.name, fwd_table_.value);
        out.emplace(bwd_table_.name, bwd_table_.value);
        out.emplace(flow_table_.name, flow_table_.value);
    } else {
        for (ad::Parameter* p : trunk_->parameters()) {
            out.emplace(p->name, p->value);
        }
    }
    return out;
}

void GfnModel::load_state_dict(const nn::TensorMap& tensors) {
    auto load = [&](ad::Parameter& p) {
        auto it = tensors.find(p.name);
        if (it == tensors.end()) {
            throw std::runtime_error("checkpoint is missing tensor '" + p.name + "'");
        }
        if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
            throw std::runtime_error("checkpoint tensor '" + p.name + "' has shape " + ad::shape_str(it->second) +
                                     ", expected " + ad::shape_str(p.value));
        }
        p.value = it->second;
    };
    load(log_z_);
    if (cfg_.kind == ParamKind::tabular) {
        load(fwd_table_);
        load(bwd_table_);
        load(flow_table_);
    } else {
        for (ad::Parameter* p : trunk_->parameters()) {
            load(*p);
        }
    }
}

ParentSlots parent_slots(const Env& env, const EvenState& s_next, ParentView view) {
    ParentSlots ps;
    ps.mask.assign(static_cast<std::size_t>(env.num_backward_slots()), false);
    if (view == ParentView::odd) {
        for (const OddState& o : env.parents(s_next)) {
            const int slot = env.backward_slot(o, s_next);
            ps.slots.push_back(slot);
            ps.mask[static_cast<std::size_t>(slot)] = true;
        }
    } else {
        for (const EvenState& p : env.even_parents(s_next)) {
            const int slot = env.even_backward_slot(p, s_next);
            ps.slots.push_back(slot);
            ps.mask[static_cast<std::size_t>(slot)] = true;
        }
    }
    return ps;
}

std::vector<double> behavior_dist(const GfnModel& model, const EvenState& s, double epsilon) {
    auto p = model.forward_dist(s);
    const auto mask = model.env().action_mask(s);
    const double nvalid = static_cast<double>(std::count(mask.begin(), mask.end(), true));
    for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] = (1.0 - epsilon) * p[j] + (mask[j] ? epsilon / nvalid : 0.0);
    }
    return p;
}

int sample_index(std::span<const double> probs, Rng& rng) {
    double u = uniform01(rng);
    int last = -1;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j] <= 0.0) {
            continue;
        }
        last = static_cast<int>(j);
        if (u < probs[j]) {
            return last;
        }
        u -= probs[j];
    }
    if (last < 0) {
        throw std::logic_error("sample_index: empty distribution");
    }
    return last;
}

Trajectory sample_trajectory(const GfnModel& model, const Env& env, double epsilon, Rng& rng) {
    return std::move(sample_trajectories(model, env, 1, epsilon, rng).front());
}

std::vector<Trajectory> sample_trajectories(const GfnModel& model, const Env& env, int count, double epsilon,
                                            Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw UsageError("sample_trajectory: epsilon must lie in [0, 1]");
    }
    std::vector<Trajectory> out(static_cast<std::size_t>(count));
    std::vector<EvenState> current(static_cast<std::size_t>(count), env.initial());
    std::vector<std::size_t> active(static_cast<std::size_t>(count));
    std::iota(active.begin(), active.end(), 0);
    const int horizon = env.horizon();
    for (int t = 0; !active.empty(); ++t) {
        if (t >= horizon) {
            throw std::logic_error("sample_trajectory: exceeded horizon " + std::to_string(horizon) + " in " +
                                   env.name() + " (acyclicity broken)");
        }
        std::vector<EvenState> batch;
        batch.reserve(active.size());
        for (std::size_t i : active) {
            batch.push_back(current[i]);
        }
        const ad::Tensor logits = model.forward_logits(batch);
        std::vector<std::size_t> still;
        for (std::size_t r = 0; r < active.size(); ++r) {
            const std::size_t i = active[r];
            const auto mask = env.action_mask(current[i]);
            auto p = masked_softmax(logits.row(static_cast<Eigen::Index>(r)).data(), mask);
            const double nvalid = static_cast<double>(std::count(mask.begin(), mask.end(), true));
            for (std::size_t j = 0; j < p.size(); ++j) {
                p[j] = (1.0 - epsilon) * p[j] + (mask[j] ? epsilon / nvalid : 0.0);
            }
            const ActionId a{sample_index(p, rng)};
            StepRecord rec = env.step(current[i], a, rng);
            current[i] = rec.s_next;
            const bool done = rec.terminal;
            out[i].steps.push_back(std::move(rec));
            if (!done) {
                still.push_back(i);
            }
        }
        active = std::move(still);
    }
    return out;
}

}  // namespace sgfn

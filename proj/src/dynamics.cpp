#include "sgfn/dynamics.hpp"

#include "sgfn/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace sgfn {

std::string to_string(DynamicsKind k) {
    switch (k) {
        case DynamicsKind::neural:
            return "neural";
        case DynamicsKind::tabular:
            return "tabular";
        case DynamicsKind::oracle:
            return "oracle";
    }
    return "?";
}

DynamicsKind parse_dynamics_kind(const std::string& s) {
    if (s == "neural") {
        return DynamicsKind::neural;
    }
    if (s == "tabular") {
        return DynamicsKind::tabular;
    }
    if (s == "oracle") {
        return DynamicsKind::oracle;
    }
    throw ConfigError("unknown dynamics model '" + s + "' (expected neural|tabular|oracle)");
}

int candidate_slot(const Env& env, const EvenState& s, ActionId a, const EvenState& s_next) {
    const auto slot = env.intended_action(s, s_next);
    if (!slot || !env.valid_action(s, *slot)) {
        throw std::invalid_argument("dynamics: next state " + format_state(s_next) +
                                    " is outside the candidate set of (" + format_state(s) + ", " +
                                    std::to_string(a.index) + ")");
    }
    return slot->index;
}

std::vector<double> TransitionModel::log_probs(std::span<const StepRecord> batch) const {
    std::vector<double> out;
    out.reserve(batch.size());
    for (const StepRecord& r : batch) {
        const auto p = predict(r.s, r.a);
        const int slot = candidate_slot(*env_, r.s, r.a, r.s_next);
        out.push_back(std::log(std::max(p[static_cast<std::size_t>(slot)], kLogFloor)));
    }
    return out;
}

double TransitionModel::nll(std::span<const StepRecord> batch) const {
    if (batch.empty()) {
        throw std::invalid_argument("dynamics: empty batch");
    }
    const auto lp = log_probs(batch);
    double s = 0.0;
    for (double v : lp) {
        s -= v;
    }
    return s / static_cast<double>(lp.size());
}

// ---- oracle -------------------------------------------------------------------

std::vector<double> OracleDynamics::predict(const EvenState& s, ActionId a) const {
    std::vector<double> p(static_cast<std::size_t>(env_->num_actions()), 0.0);
    for (const Outcome& o : env_->kernel_support(s, a)) {
        p[static_cast<std::size_t>(candidate_slot(*env_, s, a, o.next))] += o.prob;
    }
    return p;
}

std::vector<double> OracleDynamics::log_probs(std::span<const StepRecord> batch) const {
    std::vector<double> out;
    out.reserve(batch.size());
    for (const StepRecord& r : batch) {
        double p = 0.0;
        for (const Outcome& o : env_->kernel_support(r.s, r.a)) {
            if (o.next == r.s_next) {
                p += o.prob;
            }
        }
        out.push_back(std::log(std::max(p, kLogFloor)));
    }
    return out;
}

double OracleDynamics::update(std::span<const StepRecord> batch) { return nll(batch); }

// ---- tabular counts -------------------------------------------------------------

TabularDynamics::TabularDynamics(const Env& env, double smoothing) : TransitionModel(env), smoothing_(smoothing) {
    if (smoothing < 0.0) {
        throw ConfigError("train.model_smoothing: must be >= 0");
    }
}

std::vector<double> TabularDynamics::predict(const EvenState& s, ActionId a) const {
    if (!env_->valid_action(s, a)) {
        throw UsageError("dynamics: invalid action " + std::to_string(a.index) + " at " + format_state(s));
    }
    const auto mask = env_->action_mask(s);
    std::vector<double> p(mask.size(), 0.0);
    auto it = counts_.find({s, a.index});
    double total = 0.0;
    double ncand = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            p[j] = (it != counts_.end() ? it->second[j] : 0.0) + smoothing_;
            total += p[j];
            ncand += 1.0;
        }
    }
    if (total <= 0.0) {
        // No data and no smoothing: fall back to uniform over candidates.
        for (std::size_t j = 0; j < mask.size(); ++j) {
            p[j] = mask[j] ? 1.0 / ncand : 0.0;
        }
        return p;
    }
    for (double& v : p) {
        v /= total;
    }
    return p;
}

void TabularDynamics::observe(const StepRecord& rec) {
    const int slot = candidate_slot(*env_, rec.s, rec.a, rec.s_next);
    auto& c = counts_[{rec.s, rec.a.index}];
    if (c.empty()) {
        c.assign(static_cast<std::size_t>(env_->num_actions()), 0.0);
    }
    c[static_cast<std::size_t>(slot)] += 1.0;
}

double TabularDynamics::update(std::span<const StepRecord> batch) {
    const double loss = nll(batch);
    for (const StepRecord& r : batch) {
        observe(r);
    }
    return loss;
}

// ---- neural ----------------------------------------------------------------------

NeuralDynamics::NeuralDynamics(const Env& env, const std::vector<int>& hidden, nn::Activation act, double lr,
                               Rng& init_rng)
    : TransitionModel(env),
      net_("dyn", env.encoding_size() + env.num_actions(), hidden, env.num_actions(), act, init_rng) {
    if (!(lr > 0.0)) {
        throw ConfigError("train.lr_model: must be > 0");
    }
    for (ad::Parameter* p : net_.parameters()) {
        adam_.add(*p, lr);
    }
}

ad::Tensor NeuralDynamics::inputs_for(const EvenState& s, ActionId a) const {
    const int enc = env_->encoding_size();
    ad::Tensor x = ad::Tensor::Zero(1, enc + env_->num_actions());
    env_->encode(s, std::span<double>(x.data(), static_cast<std::size_t>(enc)));
    x(0, enc + a.index) = 1.0;
    return x;
}

ad::Tensor NeuralDynamics::inputs(std::span<const StepRecord> batch) const {
    const int enc = env_->encoding_size();
    ad::Tensor x = ad::Tensor::Zero(static_cast<Eigen::Index>(batch.size()), enc + env_->num_actions());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        env_->encode(batch[i].s, std::span<double>(x.row(r).data(), static_cast<std::size_t>(enc)));
        x(r, enc + batch[i].a.index) = 1.0;
    }
    return x;
}

ad::Mask NeuralDynamics::masks(std::span<const StepRecord> batch) const {
    ad::Mask m = ad::Mask::Constant(static_cast<Eigen::Index>(batch.size()), env_->num_actions(), false);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto mask = env_->action_mask(batch[i].s);
        for (std::size_t j = 0; j < mask.size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mask[j];
        }
    }
    return m;
}

std::vector<double> NeuralDynamics::predict(const EvenState& s, ActionId a) const {
    if (!env_->valid_action(s, a)) {
        throw UsageError("dynamics: invalid action " + std::to_string(a.index) + " at " + format_state(s));
    }
    const ad::Tensor logits = net_.forward(inputs_for(s, a));
    const auto mask = env_->action_mask(s);
    std::vector<double> p(mask.size(), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            mx = std::max(mx, logits(0, static_cast<Eigen::Index>(j)));
        }
    }
    double z = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            p[j] = std::exp(logits(0, static_cast<Eigen::Index>(j)) - mx);
            z += p[j];
        }
    }
    for (double& v : p) {
        v /= z;
    }
    return p;
}

std::vector<double> NeuralDynamics::log_probs(std::span<const StepRecord> batch) const {
    std::vector<double> out;
    if (batch.empty()) {
        return out;
    }
    ad::Tape tape;
    ad::Tensor logits = net_.forward(inputs(batch));
    ad::Var lp = ad::masked_log_softmax(tape.constant(std::move(logits)), masks(batch));
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const int slot = candidate_slot(*env_, batch[i].s, batch[i].a, batch[i].s_next);
        out.push_back(std::max(lp.value()(static_cast<Eigen::Index>(i), slot), std::log(kLogFloor)));
    }
    return out;
}

ad::Var NeuralDynamics::loss(ad::Tape& tape, std::span<const StepRecord> batch) {
    if (batch.empty()) {
        throw std::invalid_argument("dynamics: empty batch");
    }
    std::vector<int> slots;
    slots.reserve(batch.size());
    for (const StepRecord& r : batch) {
        slots.push_back(candidate_slot(*env_, r.s, r.a, r.s_next));
    }
    ad::Var logits = net_.forward(tape, tape.constant(inputs(batch)));
    ad::Var lp = ad::gather_cols(ad::masked_log_softmax(logits, masks(batch)), slots);
    return ad::scale(ad::mean(lp), -1.0);
}

double NeuralDynamics::update(std::span<const StepRecord> batch) {
    ad::Tape tape;
    ad::Var l = loss(tape, batch);
    adam_.zero_grad();
    tape.backward(l);
    adam_.step();
    return l.scalar();
}

nn::TensorMap NeuralDynamics::state_dict() const {
    nn::TensorMap out;
    for (const ad::Parameter* p : net_.parameters()) {
        out.emplace(p->name, p->value);
    }
    return out;
}

void NeuralDynamics::load_state_dict(const nn::TensorMap& tensors) {
    for (ad::Parameter* p : net_.parameters()) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) {
            throw std::runtime_error("checkpoint is missing tensor '" + p->name + "'");
        }
        p->value = it->second;
    }
}

std::unique_ptr<TransitionModel> make_dynamics(const Env& env, const DynamicsConfig& cfg, Rng& init_rng) {
    switch (cfg.kind) {
        case DynamicsKind::oracle:
            return std::make_unique<OracleDynamics>(env);
        case DynamicsKind::tabular:
            return std::make_unique<TabularDynamics>(env, cfg.smoothing);
        case DynamicsKind::neural:
            return std::make_unique<NeuralDynamics>(env, cfg.hidden, cfg.activation, cfg.lr, init_rng);
    }
    throw ConfigError("unsupported dynamics kind");
}

// ---- replay buffer ------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw ConfigError("train.buffer_capacity: must be >= 1");
    }
    ring_.resize(capacity);
    traj_.resize(capacity);
}

void ReplayBuffer::push(const Trajectory& t) {
    if (t.steps.empty()) {
        throw std::invalid_argument("replay buffer: cannot store an empty trajectory");
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        const bool last = i + 1 == t.steps.size();
        if (t.steps[i].terminal != last) {
            throw std::invalid_argument("replay buffer: exactly the last step of a trajectory must be terminal");
        }
        if (i > 0 && !(t.steps[i].s == t.steps[i - 1].s_next)) {
            throw std::invalid_argument("replay buffer: trajectory steps do not chain at step " + std::to_string(i));
        }
    }
    const std::uint64_t id = next_traj_++;
    for (const StepRecord& r : t.steps) {
        ring_[head_] = r;
        traj_[head_] = id;
        head_ = (head_ + 1) % capacity_;
        size_ = std::min(size_ + 1, capacity_);
    }
}

const StepRecord& ReplayBuffer::at(std::size_t i) const {
    const std::size_t oldest = (head_ + capacity_ - size_) % capacity_;
    return ring_[(oldest + i) % capacity_];
}

std::vector<StepRecord> ReplayBuffer::sample(std::size_t k, Rng& rng) const {
    if (size_ == 0) {
        throw std::invalid_argument("replay buffer: sampling from an empty buffer");
    }
    std::vector<StepRecord> out;
    out.reserve(k);
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    for (std::size_t j = 0; j < k; ++j) {
        out.push_back(at(pick(rng)));
    }
    return out;
}

std::vector<StepRecord> ReplayBuffer::contents() const {
    std::vector<StepRecord> out;
    out.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) {
        out.push_back(at(i));
    }
    return out;
}

std::vector<std::uint64_t> ReplayBuffer::trajectory_ids() const {
    std::vector<std::uint64_t> out;
    const std::size_t oldest = (head_ + capacity_ - size_) % capacity_;
    for (std::size_t i = 0; i < size_; ++i) {
        out.push_back(traj_[(oldest + i) % capacity_]);
    }
    return out;
}

void ReplayBuffer::dump(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write replay dump '" + path + "'");
    }
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    const auto ids = trajectory_ids();
    for (std::size_t i = 0; i < size_; ++i) {
        const StepRecord& r = at(i);
        out << ids[i] << " " << format_state(r.s) << " " << r.a.index << " " << format_state(r.s_next) << " "
            << (r.terminal ? 1 : 0) << " ";
        if (r.terminal) {
            out << r.reward;
        } else {
            out << "-";
        }
        out << "\n";
    }
}

}  // namespace sgfn

#include "sgfn/objectives.hpp"

#include "sgfn/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace sgfn {

std::string to_string(Objective o) {
    switch (o) {
        case Objective::db: return "db";
        case Objective::tb: return "tb";
        case Objective::stoch_db: return "stoch_db";
        case Objective::stoch_tb: return "stoch_tb";
    }
    return "?";
}

Objective parse_objective(const std::string& s) {
    if (s == "db") return Objective::db;
    if (s == "tb") return Objective::tb;
    if (s == "stoch_db") return Objective::stoch_db;
    if (s == "stoch_tb") return Objective::stoch_tb;
    throw ConfigError("unknown objective '" + s + "' (expected db, tb, stoch_db or stoch_tb)");
}

namespace {

struct EdgeTerms {
    ad::Var edge;       // log pi + log P^ - log pi_B, [N x 1]
    ad::Var flow_s;     // log F(s), [N x 1]
    ad::Var flow_next;  // log F(s') with the terminal clamp, [N x 1]
    int clamped = 0;
};

int count_below(const ad::Tensor& t, double lo) {
    return static_cast<int>((t.array() < lo).count());
}

// Per-step terms shared by every objective. Consecutive steps that chain reuse
// the same head row, so a trajectory of n steps costs n + 1 rows.
EdgeTerms edge_terms(ad::Tape& tape, GfnModel& model, const TransitionModel* dyn, bool stochastic,
                     std::span<const StepRecord> steps) {
    const Env& env = model.env();
    const auto n = static_cast<int>(steps.size());
    const int A = env.num_actions();
    const int S = env.num_backward_slots();
    if (stochastic && dyn == nullptr) {
        throw std::invalid_argument("stochastic objective needs a transition model");
    }

    std::vector<EvenState> states;
    std::vector<int> row_s(static_cast<std::size_t>(n));
    std::vector<int> row_n(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const StepRecord& r = steps[static_cast<std::size_t>(i)];
        if (i > 0 && steps[static_cast<std::size_t>(i - 1)].s_next == r.s) {
            row_s[static_cast<std::size_t>(i)] = row_n[static_cast<std::size_t>(i - 1)];
        } else {
            row_s[static_cast<std::size_t>(i)] = static_cast<int>(states.size());
            states.push_back(r.s);
        }
        row_n[static_cast<std::size_t>(i)] = static_cast<int>(states.size());
        states.push_back(r.s_next);
    }
    Heads h = model.heads(tape, states);

    ad::Mask fmask(n, A);
    ad::Mask bmask(n, S);
    std::vector<int> act(static_cast<std::size_t>(n));
    std::vector<int> slot(static_cast<std::size_t>(n));
    ad::Tensor nonterm(n, 1);
    ad::Tensor term_flow(n, 1);
    const ParentView view = stochastic ? ParentView::odd : ParentView::even;
    for (int i = 0; i < n; ++i) {
        const StepRecord& r = steps[static_cast<std::size_t>(i)];
        const auto m = env.action_mask(r.s);
        for (int a = 0; a < A; ++a) {
            fmask(i, a) = m[static_cast<std::size_t>(a)];
        }
        if (stochastic) {
            act[static_cast<std::size_t>(i)] = r.a.index;
            slot[static_cast<std::size_t>(i)] = env.backward_slot(OddState{r.s, r.a}, r.s_next);
        } else {
            const auto a = env.intended_action(r.s, r.s_next);
            if (!a) {
                throw std::invalid_argument("deterministic view: no action leads from " + format_state(r.s) +
                                            " to " + format_state(r.s_next));
            }
            act[static_cast<std::size_t>(i)] = a->index;
            slot[static_cast<std::size_t>(i)] = env.even_backward_slot(r.s, r.s_next);
        }
        const ParentSlots ps = parent_slots(env, r.s_next, view);
        for (int j = 0; j < S; ++j) {
            bmask(i, j) = ps.mask[static_cast<std::size_t>(j)];
        }
        nonterm(i, 0) = r.s_next.terminal ? 0.0 : 1.0;
        term_flow(i, 0) = r.s_next.terminal ? model.terminal_log_flow(r.s_next) : 0.0;
    }

    EdgeTerms out;
    ad::Var fwd = ad::gather_rows(h.fwd_logits, row_s);
    ad::Var bwd = ad::gather_rows(h.bwd_logits, row_n);
    ad::Var logpi = ad::gather_cols(ad::masked_log_softmax(fwd, fmask), act);
    ad::Var logpb = ad::gather_cols(ad::masked_log_softmax(bwd, bmask), slot);
    out.clamped += count_below(logpi.value(), kLogClamp) + count_below(logpb.value(), kLogClamp);
    logpi = ad::clamp_min(logpi, kLogClamp);
    logpb = ad::clamp_min(logpb, kLogClamp);
    ad::Var edge = ad::sub(logpi, logpb);
    if (stochastic) {
        const std::vector<double> lp = dyn->log_probs(steps);
        ad::Tensor c(n, 1);
        for (int i = 0; i < n; ++i) {
            c(i, 0) = lp[static_cast<std::size_t>(i)];
            if (c(i, 0) <= std::log(kLogFloor) + 1e-12) {
                ++out.clamped;
            }
        }
        edge = ad::add_const(edge, c);
    }
    out.edge = edge;
    out.flow_s = ad::gather_rows(h.log_flow, row_s);
    out.flow_next = ad::add_const(ad::mul_const(ad::gather_rows(h.log_flow, row_n), nonterm), term_flow);
    return out;
}

LossResult finish(ad::Var residual, int clamped) {
    LossResult res;
    res.loss = ad::mean(ad::square(residual));
    const ad::Tensor& r = residual.value();
    res.report.residuals.assign(r.data(), r.data() + r.size());
    res.report.mean_loss = res.loss.scalar();
    res.report.clamped_terms = clamped;
    return res;
}

}  // namespace

LossResult transition_loss(ad::Tape& tape, GfnModel& model, const TransitionModel* dyn, Objective obj,
                           std::span<const StepRecord> steps) {
    if (steps.empty()) {
        throw std::invalid_argument("loss over an empty batch");
    }
    const EdgeTerms e = edge_terms(tape, model, dyn, is_stochastic(obj), steps);
    return finish(ad::sub(ad::add(e.flow_s, e.edge), e.flow_next), e.clamped);
}

LossResult objective_loss(ad::Tape& tape, GfnModel& model, const TransitionModel* dyn, Objective obj,
                          std::span<const Trajectory> batch) {
    if (batch.empty()) {
        throw std::invalid_argument("loss over an empty batch");
    }
    std::vector<StepRecord> steps;
    std::vector<int> seg;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (batch[j].steps.empty()) {
            throw std::invalid_argument("loss over an empty trajectory");
        }
        for (const StepRecord& r : batch[j].steps) {
            steps.push_back(r);
            seg.push_back(static_cast<int>(j));
        }
    }
    if (!is_trajectory_level(obj)) {
        return transition_loss(tape, model, dyn, obj, steps);
    }
    const EdgeTerms e = edge_terms(tape, model, dyn, is_stochastic(obj), steps);
    const auto J = static_cast<Eigen::Index>(batch.size());
    ad::Tensor log_r(J, 1);
    for (Eigen::Index j = 0; j < J; ++j) {
        log_r(j, 0) = -model.terminal_log_flow(batch[static_cast<std::size_t>(j)].terminal_state());
    }
    ad::Var total = ad::segment_sum(e.edge, seg, static_cast<int>(J));
    ad::Var residual = ad::add_const(ad::add(total, ad::broadcast(model.log_z(tape), J, 1)), log_r);
    return finish(residual, e.clamped);
}

double db_loss(GfnModel& model, const StepRecord& step) {
    ad::Tape tape;
    return transition_loss(tape, model, nullptr, Objective::db, std::span(&step, 1)).report.mean_loss;
}

double tb_loss(GfnModel& model, const Trajectory& traj) {
    ad::Tape tape;
    return objective_loss(tape, model, nullptr, Objective::tb, std::span(&traj, 1)).report.mean_loss;
}

double stoch_db_loss(GfnModel& model, const TransitionModel& dyn, const StepRecord& step) {
    ad::Tape tape;
    return transition_loss(tape, model, &dyn, Objective::stoch_db, std::span(&step, 1)).report.mean_loss;
}

double stoch_tb_loss(GfnModel& model, const TransitionModel& dyn, const Trajectory& traj) {
    ad::Tape tape;
    return objective_loss(tape, model, &dyn, Objective::stoch_tb, std::span(&traj, 1)).report.mean_loss;
}

}  // namespace sgfn

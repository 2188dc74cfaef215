#pragma once

// The four log-squared training objectives.
//
// db / tb treat every observed s -> s' as a deterministic edge: the forward
// term is pi of the action whose noise-free outcome is s', the backward policy
// ranges over even parents. stoch_db / stoch_tb factor each step through the
// afterstate (s, a) and add log P^(s'|s,a) as a constant.

#include "sgfn/autodiff.hpp"
#include "sgfn/dynamics.hpp"
#include "sgfn/env.hpp"
#include "sgfn/gfn.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace sgfn {

enum class Objective { db, tb, stoch_db, stoch_tb };

std::string to_string(Objective o);
Objective parse_objective(const std::string& s);
inline bool is_stochastic(Objective o) { return o == Objective::stoch_db || o == Objective::stoch_tb; }
inline bool is_trajectory_level(Objective o) { return o == Objective::tb || o == Objective::stoch_tb; }

inline constexpr double kLogClamp = -69.07755278982137;  // log(1e-30)

struct LossBatchReport {
    double mean_loss = 0.0;
    std::vector<double> residuals;  // pre-square, one per transition (DB) or trajectory (TB)
    int clamped_terms = 0;
    std::map<std::string, double> grad_norms;  // filled by the caller after backward
};

struct LossResult {
    ad::Var loss;
    LossBatchReport report;
};

// Mean loss over the trajectories (TB-style) or over all their transitions
// (DB-style). `dyn` supplies log P^ for the stochastic objectives and may be
// null for db / tb.
LossResult objective_loss(ad::Tape& tape, GfnModel& model, const TransitionModel* dyn, Objective obj,
                          std::span<const Trajectory> batch);

// DB-style loss over loose transitions.
LossResult transition_loss(ad::Tape& tape, GfnModel& model, const TransitionModel* dyn, Objective obj,
                           std::span<const StepRecord> steps);

// Single-item conveniences returning residual^2.
double db_loss(GfnModel& model, const StepRecord& step);
double tb_loss(GfnModel& model, const Trajectory& traj);
double stoch_db_loss(GfnModel& model, const TransitionModel& dyn, const StepRecord& step);
double stoch_tb_loss(GfnModel& model, const TransitionModel& dyn, const Trajectory& traj);

}  // namespace sgfn

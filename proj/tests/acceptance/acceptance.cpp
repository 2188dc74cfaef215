// Acceptance suite: one PASS/FAIL line per criterion, tolerances as pinned in
// the README. Indented lines above each verdict are the measurements.
//
//   acceptance [--only C1,C3] [--out DIR] [--seeds N]
//
// Exit status 0 when every selected criterion passes, 1 otherwise.

#include "sgfn/config.hpp"
#include "sgfn/dynamics.hpp"
#include "sgfn/envs.hpp"
#include "sgfn/eval.hpp"
#include "sgfn/mcmc.hpp"
#include "sgfn/nn.hpp"
#include "sgfn/objectives.hpp"
#include "sgfn/runner.hpp"
#include "sgfn/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace sgfn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

void note(const std::string& s) { std::cout << "    " << s << "\n" << std::flush; }

bool verdict(const std::string& id, const std::string& title, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << id << " " << title << "\n" << std::flush;
    return ok;
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

// What the criteria need from one finished training run.
struct RunSummary {
    double final_l1 = 0.0;
    int final_modes = 0;
    std::vector<int> modes_by_tick;
    std::vector<std::int64_t> ticks;
    double grad_var = 0.0;
    std::optional<double> dyn_tv;  // mean TV over visited (s, a), learned model only
    double seconds = 0.0;
};

struct Harness {
    std::string out_dir;
    int seeds = 5;

    // key: "<label>/<method>/<seed>"
    std::map<std::string, RunSummary> cache;

    void write_jsonl(const std::string& label, const std::string& method, std::uint64_t seed,
                     const std::vector<MetricsRecord>& recs) const {
        if (out_dir.empty()) {
            return;
        }
        fs::create_directories(out_dir);
        std::ofstream f(fs::path(out_dir) / metrics_file_name(method, label, seed));
        for (const MetricsRecord& r : recs) {
            f << r.to_json().dump() << "\n";
        }
    }

    const RunSummary& train_run(const Settings& settings, const std::string& label, const std::string& method,
                                std::uint64_t seed) {
        const std::string key = label + "/" + method + "/" + std::to_string(seed);
        if (auto it = cache.find(key); it != cache.end()) {
            return it->second;
        }
        const ExperimentConfig cfg = resolve_config(settings);
        auto env = make_env(cfg.env);
        RunSummary s;
        const auto t0 = Clock::now();
        if (method == "mcmc") {
            const auto recs = mcmc_metrics(*env, mcmc_config_for(cfg, seed), cfg.train);
            s.seconds = seconds_since(t0);
            for (const MetricsRecord& r : recs) {
                s.modes_by_tick.push_back(r.modes);
                s.ticks.push_back(r.iteration);
            }
            s.final_modes = recs.back().modes;
            write_jsonl(label, method, seed, recs);
        } else {
            const TrainConfig t = train_config_for(cfg, method, seed);
            TrainRun run = train(*env, t);
            s.seconds = seconds_since(t0);
            for (const MetricsRecord& r : run.metrics) {
                s.modes_by_tick.push_back(r.modes);
                s.ticks.push_back(r.iteration);
            }
            s.final_modes = run.metrics.back().modes;
            s.final_l1 = run.metrics.back().l1_exact.value_or(NAN);
            s.grad_var = variance(run.grad_norms);
            if (uses_dynamics(t) && t.dynamics_mode == DynamicsMode::learned) {
                s.dyn_tv = mean_tv(*env, *run.dynamics, run.buffer);
            }
            write_jsonl(label, method, seed, run.metrics);
        }
        const std::string l1 = method == "mcmc" ? "" : "L1 " + fmt(s.final_l1) + ", ";
        note(label + " " + method + " seed " + std::to_string(seed) + ": " + l1 + "modes " +
             std::to_string(s.final_modes) + ", " + fmt(s.seconds, 3) + " s");
        return cache.emplace(key, std::move(s)).first->second;
    }

    static double mean_tv(const Env& env, const TransitionModel& dyn, const std::vector<StepRecord>& buffer) {
        std::set<std::pair<EvenState, int>> visited;
        for (const StepRecord& r : buffer) {
            visited.insert({r.s, r.a.index});
        }
        OracleDynamics truth(env);
        double total = 0.0;
        for (const auto& [s, a] : visited) {
            const auto p = dyn.predict(s, ActionId{a});
            const auto q = truth.predict(s, ActionId{a});
            double d = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                d += std::abs(p[j] - q[j]);
            }
            total += 0.5 * d;
        }
        return total / static_cast<double>(visited.size());
    }
};

Settings grid_settings(int H, double alpha) {
    return {{"env.kind", "hypergrid"},
            {"env.H", std::to_string(H)},
            {"env.alpha", format_double(alpha)},
            {"train.hidden", "64,64"},
            {"train.model_hidden", "64,64"},
            {"train.eval_every", "1000"}};
}

std::string grid_label(int H, double alpha) { return "hypergrid" + std::to_string(H) + "-alpha" + format_double(alpha); }

// ---- C1 -------------------------------------------------------------------------

bool c1_figure1(Harness&) {
    Figure1Toy f(0.5);
    const ExperimentConfig cfg = resolve_config({{"env.kind", "figure1"}});
    bool ok = true;
    const std::vector<std::pair<std::string, std::vector<double>>> cases = {{"db", {5.0 / 12, 7.0 / 12}},
                                                                           {"stoch_db", {1.0 / 3, 2.0 / 3}}};
    for (const auto& [method, want] : cases) {
        const TrainConfig t = train_config_for(cfg, method, 0);
        const auto t0 = Clock::now();
        const TrainRun run = train(f, t);
        const double secs = seconds_since(t0);
        const auto pt = exact_terminating_distribution(f, *run.model);
        const double l1 = std::abs(pt.probs[0] - want[0]) + std::abs(pt.probs[1] - want[1]);
        note(method + " (" + to_string(t.param_kind) + ", dynamics " + to_string(t.dynamics_mode) +
             "): P_T = (" + fmt(pt.probs[0], 5) + ", " + fmt(pt.probs[1], 5) + "), L1 to (" + fmt(want[0], 4) +
             ", " + fmt(want[1], 4) + ") = " + fmt(l1) + " [< 0.02], " + fmt(secs, 3) + " s [< 120]");
        ok = ok && l1 < 0.02 && secs < 120.0;
    }
    return verdict("C1", "figure1: db -> (5/12, 7/12), stoch_db with learned model -> (1/3, 2/3)", ok);
}

// ---- C2 -------------------------------------------------------------------------

std::vector<StepRecord> all_transitions(const Env& env) {
    std::vector<StepRecord> out;
    for (const OddState& o : env.enumerate_states().odds) {
        for (const Outcome& n : env.kernel_support(o.even, o.action)) {
            if (n.prob > 0.0) {
                StepRecord r{o.even, o.action, n.next, n.next.terminal, 0.0};
                if (r.terminal) {
                    r.reward = env.reward(n.next);
                }
                out.push_back(r);
            }
        }
    }
    return out;
}

bool c2_exactness(Harness&) {
    bool ok = true;
    Figure1Toy fig(0.5);
    EnvSpec gs;
    gs.kind = EnvKind::hypergrid;
    gs.H = 4;
    gs.alpha = 0.25;
    HyperGrid grid(gs);
    for (const Env* env : std::initializer_list<const Env*>{&fig, &grid}) {
        GfnConfig gc;
        gc.kind = ParamKind::tabular;
        Rng init = make_stream(0, kStreamInit);
        GfnModel m(*env, gc, init);
        OracleDynamics oracle(*env);
        const auto steps = all_transitions(*env);
        double worst = INFINITY;
        int iters = 0;
        for (double lr : {0.05, 0.01, 0.002, 0.0005}) {
            nn::Adam adam;
            for (ad::Parameter* p : m.network_parameters()) {
                adam.add(*p, lr);
            }
            for (int i = 0; i < 5000 && worst >= 1e-8; ++i, ++iters) {
                ad::Tape tape;
                LossResult r = transition_loss(tape, m, &oracle, Objective::stoch_db, steps);
                worst = 0.0;
                for (double v : r.report.residuals) {
                    worst = std::max(worst, v * v);
                }
                adam.zero_grad();
                tape.backward(r.loss);
                adam.step();
            }
        }
        {
            ad::Tape tape;
            worst = 0.0;
            for (double v : transition_loss(tape, m, &oracle, Objective::stoch_db, steps).report.residuals) {
                worst = std::max(worst, v * v);
            }
        }
        const double l1 = l1_error(exact_terminating_distribution(*env, m), *env, 1.0, L1Variant::sum);
        note(env->name() + ": " + std::to_string(steps.size()) + " transitions, max residual^2 " + fmt(worst) +
             " [< 1e-8] after " + std::to_string(iters) + " steps; L1 (sum) to R/Z " + fmt(l1) + " [< 1e-3]");
        ok = ok && worst < 1e-8 && l1 < 1e-3;
    }
    return verdict("C2", "exactness: stoch_db residuals < 1e-8 with the true kernel give P_T = R/Z", ok);
}

// ---- C3 / C4 / C6 ---------------------------------------------------------------

int count_wins(Harness& h, int H, double alpha, const std::string& better, const std::string& worse, bool strict) {
    int wins = 0;
    for (int s = 0; s < h.seeds; ++s) {
        const double a = h.train_run(grid_settings(H, alpha), grid_label(H, alpha), better, s).final_l1;
        const double b = h.train_run(grid_settings(H, alpha), grid_label(H, alpha), worse, s).final_l1;
        wins += strict ? a < b : a <= b;
    }
    return wins;
}

double setting_seconds(Harness& h, int H, double alpha, const std::vector<std::string>& methods) {
    double t = 0.0;
    for (const std::string& m : methods) {
        for (int s = 0; s < h.seeds; ++s) {
            t += h.train_run(grid_settings(H, alpha), grid_label(H, alpha), m, s).seconds;
        }
    }
    return t;
}

bool c3_grid_ordering(Harness& h) {
    const int need = (4 * h.seeds + 4) / 5;  // 4 of 5
    bool ok = true;
    {
        const double a = 0.25;
        const int vs_db = count_wins(h, 8, a, "stoch_db", "db", true);
        const int vs_tb = count_wins(h, 8, a, "stoch_db", "tb", true);
        int both = 0;
        int all_modes = 0;
        for (int s = 0; s < h.seeds; ++s) {
            const auto& sd = h.train_run(grid_settings(8, a), grid_label(8, a), "stoch_db", s);
            both += sd.final_l1 < h.train_run(grid_settings(8, a), grid_label(8, a), "db", s).final_l1 &&
                    sd.final_l1 < h.train_run(grid_settings(8, a), grid_label(8, a), "tb", s).final_l1;
            all_modes += sd.final_modes == 4;
        }
        const double secs = setting_seconds(h, 8, a, {"db", "tb", "stoch_db"});
        note("alpha 0.25: stoch_db below db in " + std::to_string(vs_db) + "/" + std::to_string(h.seeds) +
             ", below tb in " + std::to_string(vs_tb) + ", below both in " + std::to_string(both) + " [>= " +
             std::to_string(need) + "]; all 4 modes in " + std::to_string(all_modes) + " seeds [all]; " +
             fmt(secs / 60, 3) + " min [<= 15]");
        ok = ok && both >= need && all_modes == h.seeds && secs <= 900;
    }
    for (double a : {0.5, 0.9}) {
        const int w = count_wins(h, 8, a, "stoch_db", "db", true);
        const double secs = setting_seconds(h, 8, a, {"db", "stoch_db"});
        note("alpha " + format_double(a) + ": stoch_db below db in " + std::to_string(w) + "/" +
             std::to_string(h.seeds) + " [>= " + std::to_string(need) + "]; " + fmt(secs / 60, 3) + " min [<= 15]");
        ok = ok && w >= need && secs <= 900;
    }
    return verdict("C3", "hypergrid H=8: stoch_db beats db and tb (alpha 0.25), db (alpha 0.5, 0.9)", ok);
}

bool c4_stoch_tb(Harness& h) {
    const int need45 = (4 * h.seeds + 4) / 5;
    const int need35 = (3 * h.seeds + 4) / 5;
    bool ok = true;
    const double a = 0.25;
    for (int H : {8, 32}) {
        const int w = count_wins(h, H, a, "stoch_tb", "tb", true);
        note("H=" + std::to_string(H) + ": stoch_tb below tb in " + std::to_string(w) + "/" +
             std::to_string(h.seeds) + " [>= " + std::to_string(need45) + "]");
        ok = ok && w >= need45;
    }
    const int db_le_tb = count_wins(h, 32, a, "stoch_db", "stoch_tb", false);
    note("H=32: stoch_db <= stoch_tb in " + std::to_string(db_le_tb) + "/" + std::to_string(h.seeds) + " [>= " +
         std::to_string(need35) + "]");
    ok = ok && db_le_tb >= need35;
    for (int H : {8, 32}) {
        double vtb = 0.0;
        double vdb = 0.0;
        for (int s = 0; s < h.seeds; ++s) {
            vtb += h.train_run(grid_settings(H, a), grid_label(H, a), "stoch_tb", s).grad_var / h.seeds;
            vdb += h.train_run(grid_settings(H, a), grid_label(H, a), "stoch_db", s).grad_var / h.seeds;
        }
        note("H=" + std::to_string(H) + ": gradient-norm variance over matched updates, stoch_tb " + fmt(vtb) +
             " vs stoch_db " + fmt(vdb) + " [stoch_tb larger]");
        ok = ok && vtb > vdb;
    }
    const double secs = setting_seconds(h, 32, a, {"tb", "stoch_tb", "stoch_db"});
    note("H=32 runtime " + fmt(secs / 60, 3) + " min");
    return verdict("C4", "stoch_tb beats tb (H=8, 32), trails stoch_db at H=32, larger gradient variance", ok);
}

bool c6_dynamics(Harness& h) {
    bool ok = true;
    for (int s = 0; s < h.seeds; ++s) {
        const auto& r = h.train_run(grid_settings(8, 0.25), grid_label(8, 0.25), "stoch_db", s);
        note("seed " + std::to_string(s) + ": mean TV over visited (s,a) " + fmt(*r.dyn_tv) + " [< 0.05]");
        ok = ok && *r.dyn_tv < 0.05;
    }
    return verdict("C6", "learned dynamics on hypergrid H=8, alpha 0.25: mean TV < 0.05", ok);
}

// ---- C5 -------------------------------------------------------------------------

Settings bitseq_settings(double alpha) {
    return {{"env.kind", "bitseq"},
            {"env.n", "16"},
            {"env.k", "4"},
            {"env.num_modes", "4"},
            {"env.alpha", format_double(alpha)},
            {"train.hidden", "64,64"},
            {"train.model_hidden", "256,256"}};
}

bool c5_bitseq(Harness& h) {
    const int seeds = 3;
    bool ok = true;
    for (double a : {0.1, 0.3}) {
        const std::string label = "bitseq16k4-alpha" + format_double(a);
        int every_tick = 0;
        int strictly = 0;
        int mcmc_fewer = 0;
        for (int s = 0; s < seeds; ++s) {
            const auto& st = h.train_run(bitseq_settings(a), label, "stoch_db", s);
            const auto& gf = h.train_run(bitseq_settings(a), label, "db", s);
            const auto& mc = h.train_run(bitseq_settings(a), label, "mcmc", s);
            const int warmup = resolve_config(bitseq_settings(a)).train.warmup;
            bool ge = true;
            for (std::size_t i = 0; i < st.modes_by_tick.size(); ++i) {
                if (st.ticks[i] > warmup) {
                    ge = ge && st.modes_by_tick[i] >= gf.modes_by_tick[i];
                }
            }
            every_tick += ge;
            strictly += st.final_modes > gf.final_modes;
            mcmc_fewer += mc.final_modes < st.final_modes;
        }
        note("alpha " + format_double(a) + ": stoch_db >= db at every tick in " + std::to_string(every_tick) +
             "/3 [3]; strictly more at the end in " + std::to_string(strictly) + "/3 [>= 2]; mcmc fewer than "
             "stoch_db at the end in " + std::to_string(mcmc_fewer) + "/3 [3]");
        ok = ok && every_tick == seeds && strictly >= 2 && mcmc_fewer == seeds;
    }
    return verdict("C5", "bit sequences n=16 k=4: stoch_db finds more modes than db and mcmc", ok);
}

// ---- C7 -------------------------------------------------------------------------

struct FdResult {
    double worst = 0.0;  // max |an - fd| / max(1, |fd|)
};

void fd_check(std::vector<ad::Parameter*> params, const std::function<ad::Var(ad::Tape&)>& f, FdResult& res) {
    for (auto* p : params) {
        p->zero_grad();
    }
    {
        ad::Tape tape;
        tape.backward(f(tape));
    }
    const double h = 1e-5;
    for (auto* p : params) {
        const auto n = static_cast<std::size_t>(p->value.size());
        const std::size_t stride = std::max<std::size_t>(1, n / 300);
        for (std::size_t i = 0; i < n; i += stride) {
            double* v = p->value.data() + i;
            const double keep = *v;
            *v = keep + h;
            ad::Tape t1;
            const double up = f(t1).scalar();
            *v = keep - h;
            ad::Tape t2;
            const double down = f(t2).scalar();
            *v = keep;
            const double fd = (up - down) / (2 * h);
            res.worst = std::max(res.worst, std::abs(p->grad.data()[i] - fd) / std::max(1.0, std::abs(fd)));
        }
    }
}

void randomize(GfnModel& m, std::uint64_t seed) {
    Rng rng = make_stream(seed, 99);
    for (ad::Parameter* p : m.network_parameters()) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            p->value.data()[i] = 2.0 * uniform01(rng) - 1.0;
        }
    }
    m.log_z_param().value(0, 0) = 0.3;
}

std::vector<std::unique_ptr<Env>> numeric_envs(double alpha) {
    std::vector<std::unique_ptr<Env>> out;
    out.push_back(std::make_unique<Figure1Toy>(alpha));
    EnvSpec g;
    g.kind = EnvKind::hypergrid;
    g.H = 4;
    g.alpha = alpha;
    out.push_back(std::make_unique<HyperGrid>(g));
    g.ndim = 3;
    g.stop_noisy = true;
    out.push_back(std::make_unique<HyperGrid>(g));
    EnvSpec b;
    b.kind = EnvKind::bitseq;
    b.n = 6;
    b.k = 2;
    b.alpha = alpha;
    b.num_modes = 2;
    out.push_back(std::make_unique<BitSeq>(b));
    return out;
}

bool c7_numerics(Harness&) {
    bool ok = true;
    // finite differences
    {
        FdResult fd;
        EnvSpec gs;
        gs.kind = EnvKind::hypergrid;
        gs.H = 4;
        gs.alpha = 0.3;
        HyperGrid g(gs);
        Rng dinit = make_stream(1, 0);
        NeuralDynamics dyn(g, {8, 8}, nn::Activation::leaky_relu, 1e-3, dinit);
        for (ParamKind kind : {ParamKind::tabular, ParamKind::neural}) {
            GfnConfig gc;
            gc.kind = kind;
            gc.hidden = {12, 12};
            Rng init = make_stream(2, 0);
            GfnModel m(g, gc, init);
            randomize(m, 3);
            Rng rng = make_stream(4, 0);
            const auto trajs = sample_trajectories(m, g, 4, 0.3, rng);
            auto params = m.network_parameters();
            params.push_back(&m.log_z_param());
            for (Objective obj : {Objective::db, Objective::tb, Objective::stoch_db, Objective::stoch_tb}) {
                fd_check(params, [&](ad::Tape& t) { return objective_loss(t, m, &dyn, obj, trajs).loss; }, fd);
            }
            std::vector<StepRecord> steps;
            for (const auto& t : trajs) {
                steps.insert(steps.end(), t.steps.begin(), t.steps.end());
            }
            fd_check(dyn.parameters(), [&](ad::Tape& t) { return dyn.loss(t, steps); }, fd);
        }
        note("finite differences, 4 objectives x {tabular, neural} + model loss: worst rel. error " +
             fmt(fd.worst) + " [<= 1e-4]");
        ok = ok && fd.worst <= 1e-4;
    }
    // normalisation
    {
        double worst = 0.0;
        for (const auto& env : numeric_envs(0.3)) {
            GfnConfig gc;
            gc.kind = ParamKind::neural;
            gc.hidden = {16};
            Rng init = make_stream(5, 0);
            GfnModel m(*env, gc, init);
            randomize(m, 6);
            Rng dinit = make_stream(7, 0);
            NeuralDynamics dyn(*env, {8}, nn::Activation::leaky_relu, 1e-3, dinit);
            auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
            for (const EvenState& s : env->enumerate_states().evens) {
                if (!s.terminal) {
                    worst = std::max(worst, std::abs(sum(m.forward_dist(s)) - 1.0));
                    for (ActionId a : env->actions(s)) {
                        double k = 0.0;
                        for (const Outcome& o : env->kernel_support(s, a)) {
                            k += o.prob;
                        }
                        worst = std::max(worst, std::abs(k - 1.0));
                        worst = std::max(worst, std::abs(sum(dyn.predict(s, a)) - 1.0));
                    }
                }
                if (!(s == env->initial())) {
                    worst = std::max(worst, std::abs(sum(m.backward_dist(s, ParentView::odd)) - 1.0));
                    worst = std::max(worst, std::abs(sum(m.backward_dist(s, ParentView::even)) - 1.0));
                }
            }
        }
        note("policy, backward, kernel and model distributions: worst |sum - 1| " + fmt(worst) + " [<= 1e-9]");
        ok = ok && worst <= 1e-9;
    }
    // alpha = 0 reductions
    {
        double worst = 0.0;
        for (const auto& env : numeric_envs(0.0)) {
            OracleDynamics oracle(*env);
            for (ParamKind kind : {ParamKind::tabular, ParamKind::neural}) {
                GfnConfig gc;
                gc.kind = kind;
                gc.hidden = {16};
                Rng init = make_stream(8, 0);
                GfnModel m(*env, gc, init);
                randomize(m, 9);
                Rng rng = make_stream(10, 0);
                for (const Trajectory& t : sample_trajectories(m, *env, 16, 0.3, rng)) {
                    const double tb = tb_loss(m, t);
                    worst = std::max(worst, std::abs(stoch_tb_loss(m, oracle, t) - tb) / std::max(1.0, tb));
                    for (const StepRecord& s : t.steps) {
                        const double db = db_loss(m, s);
                        worst = std::max(worst, std::abs(stoch_db_loss(m, oracle, s) - db) / std::max(1.0, db));
                    }
                }
            }
        }
        note("alpha = 0: stoch_db vs db and stoch_tb vs tb, worst rel. difference " + fmt(worst) + " [<= 1e-12]");
        ok = ok && worst <= 1e-12;
    }
    // MH two-object stationary distribution
    {
        Figure1Toy f(0.5);
        McmcConfig mc;
        mc.chains = 1;
        mc.steps = 1000000;
        mc.seed = 11;
        double ones = 0.0;
        for (const McmcSample& s : mh_run(f, mc)) {
            ones += s.x.payload[0] == 1;
        }
        const double freq = ones / 1e6;
        note("MH on R = (1, 2), 10^6 steps: frequency of the R=2 object " + fmt(freq, 5) + " [2/3 +- 0.01]");
        ok = ok && std::abs(freq - 2.0 / 3) <= 0.01;
    }
    return verdict("C7", "numerical suite: gradients, normalisation, alpha = 0 identities, MH stationarity", ok);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::vector<std::string> only;
    Harness h;
    app.add_option("--only", only, "criteria to run, e.g. C1,C7")->delimiter(',');
    app.add_option("--out", h.out_dir, "write metrics JSONL of every training run here");
    app.add_option("--seeds", h.seeds, "seeds for the grid criteria (default 5)")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<bool(Harness&)>>> criteria = {
        {"C1", c1_figure1}, {"C2", c2_exactness}, {"C7", c7_numerics}, {"C3", c3_grid_ordering},
        {"C6", c6_dynamics}, {"C4", c4_stoch_tb}, {"C5", c5_bitseq},
    };
    const auto t0 = Clock::now();
    int failed = 0;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) {
            continue;
        }
        bool ok = false;
        try {
            ok = fn(h);
        } catch (const std::exception& e) {
            note(std::string("error: ") + e.what());
            ok = verdict(id, "(aborted)", false);
        }
        failed += !ok;
    }
    std::cout << "acceptance: " << failed << " failing, " << fmt(seconds_since(t0) / 60, 3) << " min\n";
    return failed == 0 ? 0 : 1;
}

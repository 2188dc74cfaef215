#include "sgfn/trainer.hpp"

#include "sgfn/errors.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace sgfn {

std::string to_string(DynamicsMode m) { return m == DynamicsMode::learned ? "learned" : "oracle"; }

DynamicsMode parse_dynamics_mode(const std::string& s) {
    if (s == "learned") return DynamicsMode::learned;
    if (s == "oracle") return DynamicsMode::oracle;
    throw ConfigError("unknown dynamics mode '" + s + "' (expected learned or oracle)");
}

void TrainConfig::validate() const {
    auto need = [](bool ok, const std::string& key, const std::string& form) {
        if (!ok) {
            throw ConfigError(key + ": expected " + form);
        }
    };
    need(iterations >= 1, "train.iterations", "an integer >= 1");
    need(rollouts >= 1, "train.rollouts", "an integer >= 1");
    need(model_batch >= 1, "train.model_batch", "an integer >= 1");
    need(lr > 0, "train.lr", "a positive real");
    need(lr_logz > 0, "train.lr_logz", "a positive real");
    need(lr_model > 0, "train.lr_model", "a positive real");
    need(epsilon >= 0 && epsilon <= 1, "train.epsilon", "a real in [0, 1]");
    need(reward_exponent > 0, "train.reward_exponent", "a positive real");
    need(buffer_capacity >= 1, "train.buffer_capacity", "an integer >= 1");
    need(eval_every >= 1, "train.eval_every", "an integer >= 1");
    need(warmup >= 0, "train.warmup", "an integer >= 0");
    need(eval_window >= 1, "train.eval_window", "an integer >= 1");
    need(topk >= 1, "train.topk", "an integer >= 1");
    need(mode_delta >= 0, "train.mode_delta", "an integer >= 0");
    need(model_smoothing >= 0, "train.model_smoothing", "a real >= 0");
    for (int h : hidden) {
        need(h >= 1, "train.hidden", "comma-separated positive widths");
    }
    for (int h : model_hidden) {
        need(h >= 1, "train.model_hidden", "comma-separated positive widths");
    }
    need(dynamics_kind != DynamicsKind::oracle, "train.dynamics_kind",
         "neural or tabular (use train.dynamics_mode=oracle for the true kernel)");
}

namespace {

template <class T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> get_opt(const nlohmann::ordered_json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

}  // namespace

nlohmann::ordered_json MetricsRecord::to_json() const {
    nlohmann::ordered_json j;
    j["iteration"] = iteration;
    j["wall_ms"] = wall_ms;
    j["loss"] = opt(loss);
    j["model_loss"] = opt(model_loss);
    j["l1_exact"] = opt(l1_exact);
    j["l1_empirical"] = opt(l1_empirical);
    j["modes"] = modes;
    j["top100_mean"] = opt(top100_mean);
    j["top100_median"] = opt(top100_median);
    j["clamped_terms"] = clamped_terms;
    j["seed"] = seed;
    j["method"] = method;
    j["env"] = env;
    j["grad_norm"] = opt(grad_norm);
    return j;
}

MetricsRecord MetricsRecord::from_json(const nlohmann::ordered_json& j) {
    MetricsRecord r;
    r.iteration = j.at("iteration").get<std::int64_t>();
    r.wall_ms = j.at("wall_ms").get<double>();
    r.loss = get_opt(j, "loss");
    r.model_loss = get_opt(j, "model_loss");
    r.l1_exact = get_opt(j, "l1_exact");
    r.l1_empirical = get_opt(j, "l1_empirical");
    r.modes = j.at("modes").get<int>();
    r.top100_mean = get_opt(j, "top100_mean");
    r.top100_median = get_opt(j, "top100_median");
    r.clamped_terms = j.at("clamped_terms").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.method = j.at("method").get<std::string>();
    r.env = j.at("env").get<std::string>();
    r.grad_norm = get_opt(j, "grad_norm");
    return r;
}

TrainingAbort::TrainingAbort(std::string what, std::int64_t iteration, int clamped, std::vector<Trajectory> batch)
    : std::runtime_error(std::move(what)), iteration_(iteration), clamped_(clamped), batch_(std::move(batch)) {}

void TrainingAbort::write_snapshot(const std::string& path) const {
    std::ofstream out(path);
    out << "error " << what() << "\n";
    out << "iteration " << iteration_ << "\n";
    out << "clamped_terms " << clamped_ << "\n";
    for (std::size_t t = 0; t < batch_.size(); ++t) {
        for (const StepRecord& r : batch_[t].steps) {
            out << t << " " << format_state(r.s) << " " << r.a.index << " " << format_state(r.s_next) << " "
                << (r.terminal ? 1 : 0) << " ";
            if (r.terminal) {
                out << r.reward;
            } else {
                out << "-";
            }
            out << "\n";
        }
    }
}

bool uses_dynamics(const TrainConfig& cfg) { return is_stochastic(cfg.objective); }

TrainRun train(const Env& env, const TrainConfig& cfg, const MetricsSink& sink) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&t0] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    };

    Rng init_rng = make_stream(cfg.seed, kStreamInit);
    Rng rollout_rng = make_stream(cfg.seed, kStreamRollout);
    Rng buffer_rng = make_stream(cfg.seed, kStreamBuffer);
    Rng model_rng = make_stream(cfg.seed, kStreamModelInit);

    GfnConfig gcfg;
    gcfg.kind = cfg.param_kind;
    gcfg.hidden = cfg.hidden;
    gcfg.activation = cfg.activation;
    gcfg.reward_exponent = cfg.reward_exponent;
    gcfg.learned_backward = cfg.learned_backward;

    TrainRun run;
    run.model = std::make_unique<GfnModel>(env, gcfg, init_rng);
    GfnModel& model = *run.model;

    const bool learned = cfg.dynamics_mode == DynamicsMode::learned && uses_dynamics(cfg);
    if (cfg.dynamics_mode == DynamicsMode::oracle) {
        run.dynamics = std::make_unique<OracleDynamics>(env);
    } else {
        DynamicsConfig dc;
        dc.kind = cfg.dynamics_kind;
        dc.hidden = cfg.model_hidden;
        dc.activation = cfg.activation;
        dc.lr = cfg.lr_model;
        dc.smoothing = cfg.model_smoothing;
        run.dynamics = make_dynamics(env, dc, model_rng);
    }
    TransitionModel& dyn = *run.dynamics;

    nn::Adam adam;
    for (ad::Parameter* p : model.network_parameters()) {
        adam.add(*p, cfg.lr);
    }
    adam.add(model.log_z_param(), cfg.lr_logz);
    std::vector<ad::Parameter*> all_params = model.network_parameters();
    all_params.push_back(&model.log_z_param());

    ReplayBuffer buffer(cfg.buffer_capacity);
    std::unique_ptr<ExactEvaluator> exact;
    if (env.enumerable()) {
        exact = std::make_unique<ExactEvaluator>(env, cfg.reward_exponent);
    }
    SampleWindow window(cfg.eval_window, exact.get());
    ModeTracker tracker(env.num_modes(), cfg.mode_delta);
    const std::string method = to_string(cfg.objective);
    const std::string fingerprint = env.fingerprint();

    std::optional<double> last_loss;
    std::optional<double> last_model_loss;
    std::optional<double> last_grad_norm;
    int last_clamped = 0;

    for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
        std::vector<Trajectory> batch = sample_trajectories(model, env, cfg.rollouts, cfg.epsilon, rollout_rng);
        for (const Trajectory& t : batch) {
            buffer.push(t);
            const StepRecord& last = t.steps.back();
            window.push(last.s_next, last.reward);
            tracker.observe(env, last.s_next, it);
        }

        const bool warming = learned && it <= cfg.warmup;
        if (!warming) {
            ad::Tape tape;
            LossResult lr = objective_loss(tape, model, &dyn, cfg.objective, batch);
            last_clamped = lr.report.clamped_terms;
            if (!std::isfinite(lr.report.mean_loss)) {
                throw TrainingAbort("non-finite " + method + " loss", it, last_clamped, std::move(batch));
            }
            adam.zero_grad();
            tape.backward(lr.loss);
            double sq = 0.0;
            for (const ad::Parameter* p : all_params) {
                sq += p->grad.squaredNorm();
            }
            const double gn = std::sqrt(sq);
            if (!std::isfinite(gn)) {
                throw TrainingAbort("non-finite gradient in " + method + " update", it, last_clamped,
                                    std::move(batch));
            }
            adam.step();
            last_loss = lr.report.mean_loss;
            last_grad_norm = gn;
            run.grad_norms.push_back(gn);
            ++run.updates;
        }

        if (learned) {
            const std::vector<StepRecord> mb = buffer.sample(static_cast<std::size_t>(cfg.model_batch), buffer_rng);
            const double ml = dyn.update(mb);
            if (!std::isfinite(ml)) {
                throw TrainingAbort("non-finite dynamics-model loss", it, last_clamped, std::move(batch));
            }
            last_model_loss = ml;
        }

        if (it % cfg.eval_every == 0 || it == cfg.iterations) {
            MetricsRecord rec;
            rec.iteration = it;
            rec.wall_ms = elapsed_ms();
            rec.loss = last_loss;
            rec.model_loss = last_model_loss;
            if (exact) {
                rec.l1_exact = l1_error(exact->terminating(model).probs, exact->target(), cfg.l1_variant);
                if (const auto emp = window.empirical()) {
                    rec.l1_empirical = l1_error(*emp, exact->target(), cfg.l1_variant);
                }
            }
            rec.modes = tracker.count();
            if (window.size() >= cfg.topk) {
                const auto r = window.rewards();
                const auto [mean, median] = topk_stats(r, cfg.topk);
                rec.top100_mean = mean;
                rec.top100_median = median;
            }
            rec.clamped_terms = last_clamped;
            rec.seed = cfg.seed;
            rec.method = method;
            rec.env = fingerprint;
            rec.grad_norm = last_grad_norm;
            run.metrics.push_back(rec);
            if (sink) {
                sink(rec);
            }
        }
    }
    run.buffer = buffer.contents();
    run.wall_ms = elapsed_ms();
    return run;
}

}  // namespace sgfn

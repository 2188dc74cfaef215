#include "sgfn/runner.hpp"

#include "sgfn/errors.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

namespace fs = std::filesystem;

namespace sgfn {

std::string build_fingerprint() {
    std::string s = "sgfn 0.1.0";
#if defined(__clang__)
    s += " clang " __clang_version__;
#elif defined(__GNUC__)
    s += " gcc " __VERSION__;
#endif
#ifdef NDEBUG
    s += " release";
#else
    s += " debug";
#endif
    s += " eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
    return s;
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
    fs::path p(cfg.output);
    if (p.is_relative() && !opts.output_root.empty()) {
        p = fs::path(opts.output_root) / p;
    }
    return p.string();
}

std::string run_label(const ExperimentConfig& cfg, const RunOptions& opts) {
    auto env = make_env(cfg.env);
    std::string label = env->name();
    if (!opts.label_suffix.empty()) {
        label += "-" + opts.label_suffix;
    }
    return label;
}

std::string metrics_file_name(const std::string& method, const std::string& label, std::uint64_t seed) {
    return method + "_" + label + "_" + std::to_string(seed) + ".jsonl";
}

nlohmann::ordered_json manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& planned) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    const Settings s = to_settings(cfg);
    for (const std::string& k : config_keys()) {
        c[k] = s.at(k);
    }
    j["config"] = c;
    j["build"] = build_fingerprint();
    j["env_fingerprint"] = make_env(cfg.env)->fingerprint();
    j["runs"] = planned;
    return j;
}

namespace {

std::string stem(const std::string& file) { return file.substr(0, file.size() - std::string(".jsonl").size()); }

void save_run_checkpoint(const std::string& path, const TrainRun& run) {
    nn::TensorMap all = run.model->state_dict();
    for (auto& [k, v] : run.dynamics->state_dict()) {
        all.emplace(k, v);
    }
    nn::save_checkpoint(path, all);
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    const fs::path dir = resolve_output_dir(cfg, opts);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("output: cannot create '" + dir.string() + "': " + ec.message());
    }
    const std::string label = run_label(cfg, opts);
    auto env = make_env(cfg.env);

    std::vector<std::string> planned;
    for (const std::string& m : cfg.methods) {
        for (std::uint64_t seed : cfg.seeds) {
            planned.push_back(metrics_file_name(m, label, seed));
        }
    }
    {
        std::ofstream mf(dir / opts.manifest_name);
        if (!mf) {
            throw ConfigError("output: cannot write '" + (dir / opts.manifest_name).string() + "'");
        }
        mf << manifest_json(cfg, planned).dump(2) << "\n";
    }

    RunOutcome outcome;
    for (const std::string& m : cfg.methods) {
        for (std::uint64_t seed : cfg.seeds) {
            const std::string file = metrics_file_name(m, label, seed);
            std::ofstream out(dir / file);
            auto sink = [&out](const MetricsRecord& r) {
                out << r.to_json().dump() << "\n";
                out.flush();
            };
            if (opts.log != nullptr) {
                *opts.log << "run " << file << "\n";
            }
            try {
                if (m == "mcmc") {
                    TrainConfig t = cfg.train;
                    t.seed = seed;
                    mcmc_metrics(*env, mcmc_config_for(cfg, seed), t, sink);
                } else {
                    TrainRun run = train(*env, train_config_for(cfg, m, seed), sink);
                    if (opts.checkpoints) {
                        save_run_checkpoint((dir / (stem(file) + ".ckpt")).string(), run);
                    }
                }
            } catch (const TrainingAbort& e) {
                const std::string snap = (dir / (stem(file) + ".abort.txt")).string();
                e.write_snapshot(snap);
                outcome.abort_snapshots.push_back(snap);
                if (opts.log != nullptr) {
                    *opts.log << "aborted " << file << " at iteration " << e.iteration() << ": " << e.what()
                              << " (snapshot " << snap << ")\n";
                }
            }
            outcome.metrics_files.push_back((dir / file).string());
        }
    }
    return outcome;
}

RunOutcome sweep_experiment(const Settings& base, const std::string& key, const std::vector<std::string>& values,
                            const RunOptions& opts) {
    if (!is_sweepable(key)) {
        throw ConfigError("sweep: '" + key + "' is not a sweepable key");
    }
    if (values.empty()) {
        throw ConfigError("sweep: empty value list for '" + key + "'");
    }
    // Resolve every point first so a bad value fails before anything runs.
    std::vector<ExperimentConfig> points;
    for (const std::string& v : values) {
        Settings s = base;
        s[key] = v;
        points.push_back(resolve_config(s));
    }
    RunOutcome all;
    for (std::size_t i = 0; i < values.size(); ++i) {
        RunOptions o = opts;
        const std::string tag = key + "-" + values[i];
        o.label_suffix = opts.label_suffix.empty() ? tag : opts.label_suffix + "-" + tag;
        o.manifest_name = "manifest_" + tag + ".json";
        RunOutcome r = run_experiment(points[i], o);
        all.metrics_files.insert(all.metrics_files.end(), r.metrics_files.begin(), r.metrics_files.end());
        all.abort_snapshots.insert(all.abort_snapshots.end(), r.abort_snapshots.begin(), r.abort_snapshots.end());
    }
    return all;
}

nlohmann::ordered_json eval_checkpoint(const ExperimentConfig& cfg, const std::string& method,
                                       const std::string& checkpoint, std::size_t samples, std::uint64_t seed) {
    const TrainConfig t = train_config_for(cfg, method, seed);
    auto env = make_env(cfg.env);
    GfnConfig g;
    g.kind = t.param_kind;
    g.hidden = t.hidden;
    g.activation = t.activation;
    g.reward_exponent = t.reward_exponent;
    g.learned_backward = t.learned_backward;
    Rng init = make_stream(seed, kStreamInit);
    GfnModel model(*env, g, init);
    const nn::TensorMap all = nn::load_checkpoint(checkpoint);
    nn::TensorMap mine;
    for (const auto& [k, v] : all) {
        if (k.rfind("dyn", 0) != 0) {
            mine.emplace(k, v);
        }
    }
    model.load_state_dict(mine);

    std::unique_ptr<ExactEvaluator> exact;
    if (env->enumerable()) {
        exact = std::make_unique<ExactEvaluator>(*env, t.reward_exponent);
    }
    MetricsRecord rec;
    rec.method = method;
    rec.seed = seed;
    rec.env = env->fingerprint();
    if (exact) {
        rec.l1_exact = l1_error(exact->terminating(model).probs, exact->target(), t.l1_variant);
    }
    if (samples > 0) {
        SampleWindow window(samples, exact.get());
        ModeTracker tracker(env->num_modes(), t.mode_delta);
        Rng rng = make_stream(seed, kStreamRollout);
        std::size_t done = 0;
        while (done < samples) {
            const int chunk = static_cast<int>(std::min<std::size_t>(samples - done, 256));
            for (const Trajectory& tr : sample_trajectories(model, *env, chunk, t.epsilon, rng)) {
                window.push(tr.terminal_state(), tr.steps.back().reward);
                tracker.observe(*env, tr.terminal_state(), 0);
            }
            done += static_cast<std::size_t>(chunk);
        }
        if (exact) {
            if (const auto emp = window.empirical()) {
                rec.l1_empirical = l1_error(*emp, exact->target(), t.l1_variant);
            }
        }
        rec.modes = tracker.count();
        if (window.size() >= t.topk) {
            const auto r = window.rewards();
            const auto [mean, median] = topk_stats(r, t.topk);
            rec.top100_mean = mean;
            rec.top100_median = median;
        }
    }
    nlohmann::ordered_json j = rec.to_json();
    j["log_z"] = model.log_z();
    j["checkpoint"] = checkpoint;
    return j;
}

void dump_env(const Env& env, std::ostream& out) {
    const StateGraph g = env.enumerate_states();
    out << "# " << env.fingerprint() << "\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const OddState& o : g.odds) {
        for (const Outcome& oc : env.kernel_support(o.even, o.action)) {
            out << format_state(o.even) << " " << o.action.index << " -> " << format_state(oc.next) << " " << oc.prob
                << "\n";
        }
    }
    for (const EvenState& s : g.evens) {
        if (s.terminal) {
            out << "R " << format_state(s) << " " << env.reward(s) << "\n";
        }
    }
}

}  // namespace sgfn

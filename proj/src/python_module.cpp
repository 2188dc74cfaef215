// Python bindings: configs travel as dicts of strings (the same key=value
// settings the CLI takes), states as their text encoding, metrics as JSON.

#include "sgfn/config.hpp"
#include "sgfn/envs.hpp"
#include "sgfn/errors.hpp"
#include "sgfn/eval.hpp"
#include "sgfn/mcmc.hpp"
#include "sgfn/nn.hpp"
#include "sgfn/runner.hpp"
#include "sgfn/trainer.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

namespace py = pybind11;
using namespace sgfn;

namespace {

struct PyEnv {
    std::unique_ptr<Env> env;

    std::string name() const { return env->name(); }
    std::string fingerprint() const { return env->fingerprint(); }
    std::string initial() const { return format_state(env->initial()); }
    std::vector<int> actions(const std::string& s) const {
        std::vector<int> out;
        for (ActionId a : env->actions(parse_state(s))) {
            out.push_back(a.index);
        }
        return out;
    }
    std::vector<std::pair<std::string, double>> kernel(const std::string& s, int a) const {
        std::vector<std::pair<std::string, double>> out;
        for (const Outcome& o : env->kernel_support(parse_state(s), ActionId{a})) {
            out.emplace_back(format_state(o.next), o.prob);
        }
        return out;
    }
    double reward(const std::string& x) const { return env->reward(parse_state(x)); }
    std::vector<std::string> terminals() const {
        std::vector<std::string> out;
        for (const EvenState& x : env->terminals()) {
            out.push_back(format_state(x));
        }
        return out;
    }
    std::string dump() const {
        std::ostringstream os;
        dump_env(*env, os);
        return os.str();
    }
};

struct PyRun {
    std::shared_ptr<Env> env;
    TrainRun run;
    double beta = 1.0;

    std::string metrics_json() const {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (const MetricsRecord& r : run.metrics) {
            a.push_back(r.to_json());
        }
        return a.dump();
    }
    std::vector<std::pair<std::string, double>> terminating() const {
        const auto pt = ExactEvaluator(*env, beta).terminating(*run.model);
        std::vector<std::pair<std::string, double>> out;
        for (std::size_t i = 0; i < pt.terminals.size(); ++i) {
            out.emplace_back(format_state(pt.terminals[i]), pt.probs[i]);
        }
        return out;
    }
    std::vector<double> target() const { return ExactEvaluator(*env, beta).target(); }
    std::vector<double> forward(const std::string& s) const { return run.model->forward_dist(parse_state(s)); }
    void save(const std::string& path) const {
        nn::TensorMap all = run.model->state_dict();
        for (auto& [k, v] : run.dynamics->state_dict()) {
            all.emplace(k, v);
        }
        nn::save_checkpoint(path, all);
    }
};

PyRun train_py(const Settings& settings, const std::string& method, std::uint64_t seed) {
    const ExperimentConfig cfg = resolve_config(settings);
    PyRun out;
    out.env = make_env(cfg.env);
    const TrainConfig t = train_config_for(cfg, method, seed);
    out.beta = t.reward_exponent;
    py::gil_scoped_release release;
    out.run = train(*out.env, t);
    return out;
}

std::vector<std::string> run_py(const Settings& settings, const std::string& output_root, bool checkpoints) {
    const ExperimentConfig cfg = resolve_config(settings);
    RunOptions opts;
    opts.output_root = output_root;
    opts.checkpoints = checkpoints;
    RunOutcome out;
    {
        py::gil_scoped_release release;
        out = run_experiment(cfg, opts);
    }
    if (!out.ok()) {
        throw std::runtime_error("training aborted; snapshot: " + out.abort_snapshots.front());
    }
    return out.metrics_files;
}

std::vector<py::tuple> mh_py(const Settings& settings, int chains, std::int64_t steps, std::uint64_t seed) {
    const ExperimentConfig cfg = resolve_config(settings);
    auto env = make_env(cfg.env);
    McmcConfig m;
    m.chains = chains;
    m.steps = steps;
    m.seed = seed;
    m.reward_exponent = cfg.train.reward_exponent;
    std::vector<py::tuple> out;
    for (const McmcSample& s : mh_run(*env, m)) {
        out.push_back(py::make_tuple(s.chain, s.step, format_state(s.x), s.reward, s.accepted));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stochastic GFlowNet training engine";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NotEnumerableError>(m, "NotEnumerableError", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    m.def("config_keys", &config_keys);
    m.def("resolve_config", [](const Settings& s) { return to_settings(resolve_config(s)); },
          "Fill defaults and validate; returns the fully explicit settings.");

    py::class_<PyEnv>(m, "Env")
        .def_property_readonly("name", &PyEnv::name)
        .def_property_readonly("fingerprint", &PyEnv::fingerprint)
        .def_property_readonly("initial", &PyEnv::initial)
        .def("actions", &PyEnv::actions)
        .def("kernel", &PyEnv::kernel, "(state, action) -> [(next_state, prob)]")
        .def("reward", &PyEnv::reward)
        .def("terminals", &PyEnv::terminals)
        .def("dump", &PyEnv::dump);
    m.def("make_env", [](const Settings& s) { return PyEnv{make_env(resolve_config(s).env)}; });

    py::class_<PyRun>(m, "TrainRun")
        .def("metrics_json", &PyRun::metrics_json)
        .def("terminating", &PyRun::terminating, "exact terminating distribution [(terminal, prob)]")
        .def("target", &PyRun::target)
        .def("forward", &PyRun::forward)
        .def("save_checkpoint", &PyRun::save)
        .def_property_readonly("log_z", [](const PyRun& r) { return r.run.model->log_z(); })
        .def_property_readonly("grad_norms", [](const PyRun& r) { return r.run.grad_norms; })
        .def_property_readonly("updates", [](const PyRun& r) { return r.run.updates; })
        .def_property_readonly("wall_ms", [](const PyRun& r) { return r.run.wall_ms; });
    m.def("train", &train_py, py::arg("settings"), py::arg("method"), py::arg("seed") = 0);

    m.def("run", &run_py, py::arg("settings"), py::arg("output_root") = "", py::arg("checkpoints") = true,
          "Train every (method, seed) of the config; returns the metrics file names.");
    m.def("eval_checkpoint",
          [](const Settings& s, const std::string& method, const std::string& ckpt, std::size_t samples,
             std::uint64_t seed) { return eval_checkpoint(resolve_config(s), method, ckpt, samples, seed).dump(); },
          py::arg("settings"), py::arg("method"), py::arg("checkpoint"), py::arg("samples") = 1000,
          py::arg("seed") = 0);
    m.def("mh_run", &mh_py, py::arg("settings"), py::arg("chains") = 16, py::arg("steps") = 1000,
          py::arg("seed") = 0, "[(chain, step, state, reward, accepted)] in chain-major order");

    m.def("l1_error",
          [](const std::vector<double>& pi, const std::vector<double>& target, const std::string& variant) {
              return l1_error(pi, target, parse_l1_variant(variant));
          },
          py::arg("pi"), py::arg("target"), py::arg("variant") = "mean");
    m.def("topk_stats", [](const std::vector<double>& r, std::size_t k) { return topk_stats(r, k); });
}

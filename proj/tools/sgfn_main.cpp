// sgfn: run, sweep, eval and dump-env front end.

#include "sgfn/errors.hpp"
#include "sgfn/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

sgfn::Settings gather(const std::string& config, const std::vector<std::string>& sets, const std::string& seed,
                      bool oracle) {
    sgfn::Settings s;
    if (!config.empty()) {
        s = sgfn::read_settings_file(config);
    }
    for (const std::string& kv : sets) {
        auto [k, v] = sgfn::split_assignment(kv);
        s[k] = v;
    }
    if (!seed.empty()) {
        s["seeds"] = seed;
    }
    if (oracle) {
        s["train.dynamics_mode"] = "oracle";
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic GFlowNet training engine"};
    app.require_subcommand(1);

    std::string config;
    std::vector<std::string> sets;
    std::string seed;
    bool oracle = false;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "key=value config file or a manifest.json");
        sub->add_option("--set", sets, "override, key=value (repeatable)");
        sub->add_option("--seed", seed, "seed list, e.g. 0,1,2 (overrides 'seeds')");
        sub->add_flag("--oracle-dynamics", oracle, "use the true kernel instead of a learned model");
    };

    CLI::App* run = app.add_subcommand("run", "train every (method, seed) and write metrics JSONL");
    common(run);

    CLI::App* sweep = app.add_subcommand("sweep", "run once per value of a config key");
    common(sweep);
    std::string axis;
    std::vector<std::string> values;
    sweep->add_option("--axis", axis, "config key to sweep")->required();
    sweep->add_option("--values", values, "values (comma-separated or repeated)")->delimiter(',');

    CLI::App* ev = app.add_subcommand("eval", "recompute metrics from a checkpoint");
    common(ev);
    std::string checkpoint;
    std::string method;
    std::size_t samples = 10000;
    ev->add_option("--checkpoint", checkpoint, "checkpoint written by run")->required();
    ev->add_option("--method", method, "objective the checkpoint was trained with (default: first method)");
    ev->add_option("--samples", samples, "rollouts for empirical metrics");

    CLI::App* dump = app.add_subcommand("dump-env", "print the kernel table of an enumerable env");
    common(dump);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    sgfn::RunOptions opts;
    if (const char* root = std::getenv(sgfn::kOutputRootEnv)) {
        opts.output_root = root;
    }
    opts.log = &std::cerr;

    try {
        const sgfn::Settings settings = gather(config, sets, seed, oracle);
        if (*run) {
            const auto cfg = sgfn::resolve_config(settings);
            const auto outcome = sgfn::run_experiment(cfg, opts);
            return outcome.ok() ? 0 : kExitAbort;
        }
        if (*sweep) {
            const auto outcome = sgfn::sweep_experiment(settings, axis, values, opts);
            return outcome.ok() ? 0 : kExitAbort;
        }
        const auto cfg = sgfn::resolve_config(settings);
        if (*ev) {
            const std::string m = method.empty() ? cfg.methods.front() : method;
            if (m == "mcmc") {
                throw sgfn::ConfigError("eval: mcmc runs have no checkpoint");
            }
            std::cout << sgfn::eval_checkpoint(cfg, m, checkpoint, samples, cfg.seeds.front()).dump() << "\n";
            return 0;
        }
        sgfn::dump_env(*sgfn::make_env(cfg.env), std::cout);
        return 0;
    } catch (const sgfn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sgfn::NotEnumerableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

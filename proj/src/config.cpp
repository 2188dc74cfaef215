#include "sgfn/config.hpp"

#include "sgfn/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace sgfn {

namespace {

const std::vector<std::string> kKeys = {
    "env.kind",          "env.H",              "env.ndim",           "env.n",
    "env.k",             "env.alpha",          "env.R0",             "env.R1",
    "env.R2",            "env.num_modes",      "env.mode_seed",      "env.mode_set",
    "env.stop_noisy",    "env.reward_file",    "env.mode_threshold", "env.enum_cap",
    "method",            "seeds",              "output",             "train.dynamics_mode",
    "train.dynamics_kind", "train.iterations", "train.rollouts",     "train.model_batch",
    "train.lr",          "train.lr_logz",      "train.lr_model",     "train.epsilon",
    "train.reward_exponent", "train.buffer_capacity", "train.eval_every", "train.param_kind",
    "train.hidden",      "train.model_hidden", "train.activation",   "train.backward",
    "train.model_smoothing", "train.warmup",   "train.eval_window",  "train.topk",
    "train.l1_variant",  "train.mode_delta",   "mcmc.chains",
};

const std::set<std::string> kNotSweepable = {"env.kind", "env.reward_file", "env.mode_set", "method",
                                             "seeds",    "output"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        out.push_back(trim(cur));
    }
    return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& form) {
    throw ConfigError(key + "=" + value + ": expected " + form);
}

std::int64_t to_int(const std::string& key, const std::string& v, std::int64_t lo = INT64_MIN) {
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
        bad(key, v, "an integer");
    }
    if (out < lo) {
        bad(key, v, "an integer >= " + std::to_string(lo));
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
        bad(key, v, "a real number");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, v, "true or false");
}

std::vector<int> to_widths(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const std::string& part : split(v, ',')) {
        out.push_back(static_cast<int>(to_int(key, part, 1)));
    }
    if (out.empty()) {
        bad(key, v, "comma-separated positive widths");
    }
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + std::to_string(v[i]);
    }
    return s;
}

template <class F>
auto with_key(const std::string& key, const std::string& value, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(key, 0) == 0) {
            throw;
        }
        throw ConfigError(key + "=" + value + ": " + msg);
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

const std::vector<std::string>& config_keys() { return kKeys; }

bool is_sweepable(const std::string& key) {
    return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end() && kNotSweepable.count(key) == 0;
}

Settings default_settings(EnvKind kind) {
    Settings s = {
        {"env.kind", to_string(kind)},
        {"env.H", "8"},
        {"env.ndim", "2"},
        {"env.n", "16"},
        {"env.k", "4"},
        {"env.alpha", "0.25"},
        {"env.R0", "0.001"},
        {"env.R1", "0.5"},
        {"env.R2", "2"},
        {"env.num_modes", "4"},
        {"env.mode_seed", "0"},
        {"env.mode_set", ""},
        {"env.stop_noisy", "false"},
        {"env.reward_file", ""},
        {"env.mode_threshold", "0"},
        {"env.enum_cap", "2000000"},
        {"method", "stoch_db"},
        {"seeds", "0"},
        {"output", "runs"},
        {"train.dynamics_mode", "learned"},
        {"train.dynamics_kind", "neural"},
        {"train.iterations", "20000"},
        {"train.rollouts", "16"},
        {"train.model_batch", "16"},
        {"train.lr", "0.001"},
        {"train.lr_logz", "0.1"},
        {"train.lr_model", "0.0001"},
        {"train.epsilon", "0"},
        {"train.reward_exponent", "1"},
        {"train.buffer_capacity", "100000"},
        {"train.eval_every", "100"},
        {"train.param_kind", "neural"},
        {"train.hidden", "256,256"},
        {"train.model_hidden", "256,256"},
        {"train.activation", "leaky_relu"},
        {"train.backward", "learned"},
        {"train.model_smoothing", "0.1"},
        {"train.warmup", "10"},
        {"train.eval_window", "100000"},
        {"train.topk", "100"},
        {"train.l1_variant", "mean"},
        {"train.mode_delta", "0"},
        {"mcmc.chains", "16"},
    };
    switch (kind) {
        case EnvKind::figure1:
            s["env.alpha"] = "0.5";
            s["train.iterations"] = "5000";
            s["train.param_kind"] = "tabular";
            s["train.lr"] = "0.01";
            s["train.lr_model"] = "0.001";
            s["train.eval_every"] = "50";
            s["train.topk"] = "1";
            break;
        case EnvKind::hypergrid:
            break;
        case EnvKind::bitseq:
        case EnvKind::external:
            s["env.alpha"] = "0.1";
            s["train.iterations"] = "50000";
            s["train.model_batch"] = "128";
            s["train.lr"] = "0.005";
            s["train.lr_model"] = "0.0005";
            s["train.epsilon"] = "0.0005";
            s["train.reward_exponent"] = "3";
            s["train.model_hidden"] = "2048,2048";
            s["train.activation"] = "relu";
            s["train.eval_every"] = "500";
            break;
    }
    return s;
}

std::pair<std::string, std::string> split_assignment(const std::string& entry) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("'" + entry + "': expected key=value");
    }
    std::string key = trim(entry.substr(0, eq));
    if (key.empty()) {
        throw ConfigError("'" + entry + "': empty key");
    }
    return {key, trim(entry.substr(eq + 1))};
}

Settings parse_settings_text(const std::string& text, const std::string& origin) {
    Settings out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        try {
            auto [k, v] = split_assignment(t);
            out[k] = v;
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

Settings read_settings_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(ss.str());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + ": " + e.what());
        }
        if (!j.contains("config") || !j["config"].is_object()) {
            throw ConfigError(path + ": manifest has no \"config\" object");
        }
        Settings out;
        for (auto& [k, v] : j["config"].items()) {
            if (!v.is_string()) {
                throw ConfigError(path + ": config." + k + " is not a string");
            }
            out[k] = v.get<std::string>();
        }
        return out;
    }
    return parse_settings_text(ss.str(), path);
}

ExperimentConfig resolve_config(const Settings& user) {
    for (const auto& [k, v] : user) {
        if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) {
            throw ConfigError("unknown key '" + k + "'");
        }
    }
    EnvKind kind = EnvKind::figure1;
    if (auto it = user.find("env.kind"); it != user.end()) {
        kind = with_key("env.kind", it->second, [&] { return parse_env_kind(it->second); });
    }
    Settings s = default_settings(kind);
    for (const auto& [k, v] : user) {
        s[k] = v;
    }
    auto get = [&s](const char* k) -> const std::string& { return s.at(k); };

    ExperimentConfig c;
    EnvSpec& e = c.env;
    e.kind = kind;
    e.H = static_cast<int>(to_int("env.H", get("env.H")));
    e.ndim = static_cast<int>(to_int("env.ndim", get("env.ndim")));
    e.n = static_cast<int>(to_int("env.n", get("env.n")));
    e.k = static_cast<int>(to_int("env.k", get("env.k")));
    e.alpha = to_double("env.alpha", get("env.alpha"));
    e.R0 = to_double("env.R0", get("env.R0"));
    e.R1 = to_double("env.R1", get("env.R1"));
    e.R2 = to_double("env.R2", get("env.R2"));
    e.num_modes = static_cast<int>(to_int("env.num_modes", get("env.num_modes")));
    e.mode_seed = static_cast<std::uint64_t>(to_int("env.mode_seed", get("env.mode_seed"), 0));
    for (const std::string& m : split(get("env.mode_set"), ',')) {
        if (m.empty()) {
            continue;
        }
        std::vector<int> bits;
        for (char ch : m) {
            if (ch != '0' && ch != '1') {
                bad("env.mode_set", get("env.mode_set"), "comma-separated bit strings");
            }
            bits.push_back(ch - '0');
        }
        e.mode_set.push_back(std::move(bits));
    }
    e.stop_noisy = to_bool("env.stop_noisy", get("env.stop_noisy"));
    e.reward_file = get("env.reward_file");
    e.mode_threshold = to_double("env.mode_threshold", get("env.mode_threshold"));
    e.enum_cap = static_cast<std::size_t>(to_int("env.enum_cap", get("env.enum_cap"), 1));
    e.validate();

    for (const std::string& m : split(get("method"), ',')) {
        if (m != "mcmc") {
            with_key("method", get("method"), [&] { return parse_objective(m); });
        }
        if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end()) {
            bad("method", get("method"), "distinct methods");
        }
        c.methods.push_back(m);
    }
    if (c.methods.empty()) {
        bad("method", get("method"), "a comma-separated list of db, tb, stoch_db, stoch_tb, mcmc");
    }
    for (const std::string& sd : split(get("seeds"), ',')) {
        const auto v = static_cast<std::uint64_t>(to_int("seeds", sd, 0));
        if (std::find(c.seeds.begin(), c.seeds.end(), v) != c.seeds.end()) {
            bad("seeds", get("seeds"), "distinct seeds");
        }
        c.seeds.push_back(v);
    }
    if (c.seeds.empty()) {
        bad("seeds", get("seeds"), "a non-empty comma-separated list of seeds");
    }
    c.output = get("output");
    if (c.output.empty()) {
        bad("output", "", "a directory");
    }

    TrainConfig& t = c.train;
    t.dynamics_mode = with_key("train.dynamics_mode", get("train.dynamics_mode"),
                               [&] { return parse_dynamics_mode(get("train.dynamics_mode")); });
    t.dynamics_kind = with_key("train.dynamics_kind", get("train.dynamics_kind"),
                               [&] { return parse_dynamics_kind(get("train.dynamics_kind")); });
    t.iterations = to_int("train.iterations", get("train.iterations"));
    t.rollouts = static_cast<int>(to_int("train.rollouts", get("train.rollouts")));
    t.model_batch = static_cast<int>(to_int("train.model_batch", get("train.model_batch")));
    t.lr = to_double("train.lr", get("train.lr"));
    t.lr_logz = to_double("train.lr_logz", get("train.lr_logz"));
    t.lr_model = to_double("train.lr_model", get("train.lr_model"));
    t.epsilon = to_double("train.epsilon", get("train.epsilon"));
    t.reward_exponent = to_double("train.reward_exponent", get("train.reward_exponent"));
    t.buffer_capacity = static_cast<std::size_t>(to_int("train.buffer_capacity", get("train.buffer_capacity"), 1));
    t.eval_every = to_int("train.eval_every", get("train.eval_every"));
    t.param_kind = with_key("train.param_kind", get("train.param_kind"),
                            [&] { return parse_param_kind(get("train.param_kind")); });
    t.hidden = to_widths("train.hidden", get("train.hidden"));
    t.model_hidden = to_widths("train.model_hidden", get("train.model_hidden"));
    t.activation = with_key("train.activation", get("train.activation"),
                            [&] { return nn::parse_activation(get("train.activation")); });
    const std::string& bw = get("train.backward");
    if (bw != "learned" && bw != "uniform") {
        bad("train.backward", bw, "learned or uniform");
    }
    t.learned_backward = bw == "learned";
    t.model_smoothing = to_double("train.model_smoothing", get("train.model_smoothing"));
    t.warmup = static_cast<int>(to_int("train.warmup", get("train.warmup")));
    t.eval_window = static_cast<std::size_t>(to_int("train.eval_window", get("train.eval_window"), 1));
    t.topk = static_cast<std::size_t>(to_int("train.topk", get("train.topk"), 1));
    t.l1_variant = with_key("train.l1_variant", get("train.l1_variant"),
                            [&] { return parse_l1_variant(get("train.l1_variant")); });
    t.mode_delta = static_cast<int>(to_int("train.mode_delta", get("train.mode_delta")));
    t.validate();
    c.mcmc_chains = static_cast<int>(to_int("mcmc.chains", get("mcmc.chains"), 1));
    return c;
}

Settings to_settings(const ExperimentConfig& c) {
    Settings s;
    const EnvSpec& e = c.env;
    s["env.kind"] = to_string(e.kind);
    s["env.H"] = std::to_string(e.H);
    s["env.ndim"] = std::to_string(e.ndim);
    s["env.n"] = std::to_string(e.n);
    s["env.k"] = std::to_string(e.k);
    s["env.alpha"] = format_double(e.alpha);
    s["env.R0"] = format_double(e.R0);
    s["env.R1"] = format_double(e.R1);
    s["env.R2"] = format_double(e.R2);
    s["env.num_modes"] = std::to_string(e.num_modes);
    s["env.mode_seed"] = std::to_string(e.mode_seed);
    std::string ms;
    for (std::size_t i = 0; i < e.mode_set.size(); ++i) {
        ms += i ? "," : "";
        for (int b : e.mode_set[i]) {
            ms += static_cast<char>('0' + b);
        }
    }
    s["env.mode_set"] = ms;
    s["env.stop_noisy"] = e.stop_noisy ? "true" : "false";
    s["env.reward_file"] = e.reward_file;
    s["env.mode_threshold"] = format_double(e.mode_threshold);
    s["env.enum_cap"] = std::to_string(e.enum_cap);
    std::string methods;
    for (std::size_t i = 0; i < c.methods.size(); ++i) {
        methods += (i ? "," : "") + c.methods[i];
    }
    s["method"] = methods;
    std::string seeds;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
        seeds += (i ? "," : "") + std::to_string(c.seeds[i]);
    }
    s["seeds"] = seeds;
    s["output"] = c.output;
    const TrainConfig& t = c.train;
    s["train.dynamics_mode"] = to_string(t.dynamics_mode);
    s["train.dynamics_kind"] = to_string(t.dynamics_kind);
    s["train.iterations"] = std::to_string(t.iterations);
    s["train.rollouts"] = std::to_string(t.rollouts);
    s["train.model_batch"] = std::to_string(t.model_batch);
    s["train.lr"] = format_double(t.lr);
    s["train.lr_logz"] = format_double(t.lr_logz);
    s["train.lr_model"] = format_double(t.lr_model);
    s["train.epsilon"] = format_double(t.epsilon);
    s["train.reward_exponent"] = format_double(t.reward_exponent);
    s["train.buffer_capacity"] = std::to_string(t.buffer_capacity);
    s["train.eval_every"] = std::to_string(t.eval_every);
    s["train.param_kind"] = to_string(t.param_kind);
    s["train.hidden"] = join(t.hidden);
    s["train.model_hidden"] = join(t.model_hidden);
    s["train.activation"] = nn::to_string(t.activation);
    s["train.backward"] = t.learned_backward ? "learned" : "uniform";
    s["train.model_smoothing"] = format_double(t.model_smoothing);
    s["train.warmup"] = std::to_string(t.warmup);
    s["train.eval_window"] = std::to_string(t.eval_window);
    s["train.topk"] = std::to_string(t.topk);
    s["train.l1_variant"] = to_string(t.l1_variant);
    s["train.mode_delta"] = std::to_string(t.mode_delta);
    s["mcmc.chains"] = std::to_string(c.mcmc_chains);
    return s;
}

TrainConfig train_config_for(const ExperimentConfig& cfg, const std::string& method, std::uint64_t seed) {
    TrainConfig t = cfg.train;
    t.objective = parse_objective(method);
    t.seed = seed;
    return t;
}

McmcConfig mcmc_config_for(const ExperimentConfig& cfg, std::uint64_t seed) {
    McmcConfig m;
    m.chains = cfg.mcmc_chains;
    m.reward_exponent = cfg.train.reward_exponent;
    m.seed = seed;
    m.steps = std::max<std::int64_t>(1, cfg.train.iterations * cfg.train.rollouts / cfg.mcmc_chains);
    return m;
}

}  // namespace sgfn

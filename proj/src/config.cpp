#include "emf/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace emf {

ObjectiveKind objective_from_string(const std::string& s) {
    if (s == "fm") return ObjectiveKind::fm;
    if (s == "meanflow") return ObjectiveKind::meanflow;
    if (s == "emf_u") return ObjectiveKind::emf_u;
    if (s == "emf_x1") return ObjectiveKind::emf_x1;
    if (s == "emf_aux") return ObjectiveKind::emf_aux;
    contract_fail("unknown objective '" + s + "' (expected fm|meanflow|emf_u|emf_x1|emf_aux)");
}

std::string to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::fm: return "fm";
        case ObjectiveKind::meanflow: return "meanflow";
        case ObjectiveKind::emf_u: return "emf_u";
        case ObjectiveKind::emf_x1: return "emf_x1";
        case ObjectiveKind::emf_aux: return "emf_aux";
    }
    contract_fail("bad ObjectiveKind");
}

void RunConfig::resolve() {
    net.input_dim = 2;
    net.num_classes = data.labeled() ? data.n_classes : 0;
    net.prediction = objective == ObjectiveKind::emf_x1 ? PredictionKind::x1 : PredictionKind::u;
    if (objective == ObjectiveKind::emf_aux && net.aux_head_depth == 0) net.aux_head_depth = 1;

    switch (adaptive_mode) {
        case AdaptiveMode::automatic: obj.adaptive = objective == ObjectiveKind::meanflow; break;
        case AdaptiveMode::on: obj.adaptive = true; break;
        case AdaptiveMode::off: obj.adaptive = false; break;
    }

    contract(!out_dir.empty(), "run.out must not be empty");
    contract(steps >= 0, "opt.steps must be >= 0");
    contract(batch > 0, "opt.batch must be positive");
    contract(ema_decay >= 0.0 && ema_decay < 1.0, "opt.ema_decay must lie in [0, 1)");
    contract(log_every > 0, "log.every must be positive");
    contract(checkpoint_every > 0, "log.checkpoint_every must be positive");
    contract(eval_points > 0, "log.eval_points must be positive");
    contract(obj.delta_t > 0.0, "emf.delta_t must be positive");
    contract(obj.adaptive_c > 0.0, "emf.adaptive_c must be positive");
    contract(net.hidden_width > 0 && net.depth > 0, "net width/depth must be positive");
    contract(net.time_features > 0, "net.time_features must be positive");
    contract(data.scale > 0.0, "data.scale must be positive");
    contract(data.noise_std >= 0.0, "data.noise_std must be >= 0");
    contract(!data.labeled() || data.n_classes > 0, "data.n_classes must be positive");
    contract(times.alpha >= 0.0 && times.alpha <= 1.0, "time.alpha must lie in [0, 1]");
    contract(times.sigma > 0.0, "time.sigma must be positive");
    contract(adam.lr > 0.0, "opt.lr must be positive");

    if (obj.guidance.enabled) {
        contract(data.labeled(), "cfg.enabled requires a labeled dataset");
        contract(objective != ObjectiveKind::emf_aux, "guidance is unsupported for emf_aux");
        contract(obj.guidance.k < 1.0, "cfg.k must be < 1");
        contract(obj.guidance.dropout_prob >= 0.0 && obj.guidance.dropout_prob <= 1.0,
                 "cfg.dropout_prob must lie in [0, 1]");
    }
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_line(int line, const std::string& msg) {
    contract_fail("config line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, int line) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        bad_line(line, "expected a number, got '" + v + "'");
    }
    if (pos != v.size()) bad_line(line, "trailing characters in number '" + v + "'");
    return out;
}

long parse_long(const std::string& v, int line) {
    std::size_t pos = 0;
    long out = 0;
    try {
        out = std::stol(v, &pos);
    } catch (const std::exception&) {
        bad_line(line, "expected an integer, got '" + v + "'");
    }
    if (pos != v.size()) bad_line(line, "trailing characters in integer '" + v + "'");
    return out;
}

int parse_int(const std::string& v, int line) { return static_cast<int>(parse_long(v, line)); }

std::uint64_t parse_u64(const std::string& v, int line) {
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        bad_line(line, "expected an unsigned integer, got '" + v + "'");
    }
    if (pos != v.size()) bad_line(line, "trailing characters in integer '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_line(line, "expected true|false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = {
        {"run.objective", [](RunConfig& c, const std::string& v, int) { c.objective = objective_from_string(v); }},
        {"run.seed", [](RunConfig& c, const std::string& v, int l) { c.seed = parse_u64(v, l); }},
        {"run.out", [](RunConfig& c, const std::string& v, int) { c.out_dir = v; }},

        {"net.hidden_width", [](RunConfig& c, const std::string& v, int l) { c.net.hidden_width = parse_int(v, l); }},
        {"net.depth", [](RunConfig& c, const std::string& v, int l) { c.net.depth = parse_int(v, l); }},
        {"net.time_features", [](RunConfig& c, const std::string& v, int l) { c.net.time_features = parse_int(v, l); }},
        {"net.activation", [](RunConfig& c, const std::string& v, int l) {
             if (v == "silu") c.net.activation = Activation::silu;
             else if (v == "tanh") c.net.activation = Activation::tanh;
             else bad_line(l, "expected silu|tanh, got '" + v + "'");
         }},
        {"net.aux_head_depth", [](RunConfig& c, const std::string& v, int l) { c.net.aux_head_depth = parse_int(v, l); }},

        {"emf.delta_t", [](RunConfig& c, const std::string& v, int l) { c.obj.delta_t = parse_double(v, l); }},
        {"emf.adaptive", [](RunConfig& c, const std::string& v, int l) {
             if (v == "auto") c.adaptive_mode = AdaptiveMode::automatic;
             else if (v == "on") c.adaptive_mode = AdaptiveMode::on;
             else if (v == "off") c.adaptive_mode = AdaptiveMode::off;
             else bad_line(l, "expected auto|on|off, got '" + v + "'");
         }},
        {"emf.adaptive_c", [](RunConfig& c, const std::string& v, int l) { c.obj.adaptive_c = parse_double(v, l); }},
        {"emf.adaptive_p", [](RunConfig& c, const std::string& v, int l) { c.obj.adaptive_p = parse_double(v, l); }},
        {"emf.time_weight", [](RunConfig& c, const std::string& v, int l) { c.obj.time_weight = parse_bool(v, l); }},
        {"emf.time_weight_use_r", [](RunConfig& c, const std::string& v, int l) { c.obj.time_weight_use_r = parse_bool(v, l); }},
        {"emf.mu1", [](RunConfig& c, const std::string& v, int l) { c.obj.mu1 = parse_double(v, l); }},
        {"emf.mu2", [](RunConfig& c, const std::string& v, int l) { c.obj.mu2 = parse_double(v, l); }},

        {"cfg.enabled", [](RunConfig& c, const std::string& v, int l) { c.obj.guidance.enabled = parse_bool(v, l); }},
        {"cfg.w", [](RunConfig& c, const std::string& v, int l) { c.obj.guidance.w = parse_double(v, l); }},
        {"cfg.k", [](RunConfig& c, const std::string& v, int l) { c.obj.guidance.k = parse_double(v, l); }},
        {"cfg.dropout_prob", [](RunConfig& c, const std::string& v, int l) { c.obj.guidance.dropout_prob = parse_double(v, l); }},

        {"time.dist", [](RunConfig& c, const std::string& v, int l) {
             if (v == "uniform") c.times.dist = TimeDist::uniform;
             else if (v == "lognormal") c.times.dist = TimeDist::lognormal;
             else bad_line(l, "expected uniform|lognormal, got '" + v + "'");
         }},
        {"time.mu", [](RunConfig& c, const std::string& v, int l) { c.times.mu = parse_double(v, l); }},
        {"time.sigma", [](RunConfig& c, const std::string& v, int l) { c.times.sigma = parse_double(v, l); }},
        {"time.alpha", [](RunConfig& c, const std::string& v, int l) { c.times.alpha = parse_double(v, l); }},

        {"opt.lr", [](RunConfig& c, const std::string& v, int l) { c.adam.lr = parse_double(v, l); }},
        {"opt.beta1", [](RunConfig& c, const std::string& v, int l) { c.adam.beta1 = parse_double(v, l); }},
        {"opt.beta2", [](RunConfig& c, const std::string& v, int l) { c.adam.beta2 = parse_double(v, l); }},
        {"opt.eps", [](RunConfig& c, const std::string& v, int l) { c.adam.eps = parse_double(v, l); }},
        {"opt.weight_decay", [](RunConfig& c, const std::string& v, int l) { c.adam.weight_decay = parse_double(v, l); }},
        {"opt.steps", [](RunConfig& c, const std::string& v, int l) { c.steps = parse_long(v, l); }},
        {"opt.batch", [](RunConfig& c, const std::string& v, int l) { c.batch = parse_int(v, l); }},
        {"opt.ema_decay", [](RunConfig& c, const std::string& v, int l) { c.ema_decay = parse_double(v, l); }},

        {"log.every", [](RunConfig& c, const std::string& v, int l) { c.log_every = parse_long(v, l); }},
        {"log.checkpoint_every", [](RunConfig& c, const std::string& v, int l) { c.checkpoint_every = parse_long(v, l); }},
        {"log.eval_points", [](RunConfig& c, const std::string& v, int l) { c.eval_points = parse_int(v, l); }},
    };
    return table;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    // dataset keys are collected first and applied together: the kind's default
    // scale/noise act as a baseline and explicit keys override it regardless of
    // the order they appear in
    bool have_scale = false, have_noise = false, have_classes = false;
    double scale = 0.0, noise = 0.0;
    int n_classes = 0;

    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = raw;
        if (std::size_t h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
        s = trim(s);
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) bad_line(line, "expected `section.key = value`");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) bad_line(line, "empty key");
        if (value.empty()) bad_line(line, "empty value for key '" + key + "'");

        if (key == "data.kind") {
            cfg.data = default_dataset(dataset_kind_from_string(value));
            continue;
        }
        if (key == "data.scale") {
            scale = parse_double(value, line);
            have_scale = true;
            continue;
        }
        if (key == "data.noise_std") {
            noise = parse_double(value, line);
            have_noise = true;
            continue;
        }
        if (key == "data.n_classes") {
            n_classes = parse_int(value, line);
            have_classes = true;
            continue;
        }
        auto it = key_table().find(key);
        if (it == key_table().end()) bad_line(line, "unknown key '" + key + "'");
        it->second(cfg, value, line);
    }
    if (have_scale) cfg.data.scale = scale;
    if (have_noise) cfg.data.noise_std = noise;
    if (have_classes) cfg.data.n_classes = n_classes;
    cfg.resolve();
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    contract(f.good(), "cannot open config file '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config(os.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "run.objective = " << to_string(cfg.objective) << "\n";
    os << "run.seed = " << cfg.seed << "\n";
    os << "run.out = " << cfg.out_dir << "\n";

    os << "data.kind = " << to_string(cfg.data.kind) << "\n";
    os << "data.scale = " << fmt(cfg.data.scale) << "\n";
    os << "data.noise_std = " << fmt(cfg.data.noise_std) << "\n";
    os << "data.n_classes = " << cfg.data.n_classes << "\n";

    os << "net.hidden_width = " << cfg.net.hidden_width << "\n";
    os << "net.depth = " << cfg.net.depth << "\n";
    os << "net.time_features = " << cfg.net.time_features << "\n";
    os << "net.activation = " << (cfg.net.activation == Activation::silu ? "silu" : "tanh") << "\n";
    os << "net.aux_head_depth = " << cfg.net.aux_head_depth << "\n";

    os << "emf.delta_t = " << fmt(cfg.obj.delta_t) << "\n";
    const char* am = cfg.adaptive_mode == AdaptiveMode::automatic ? "auto"
                     : cfg.adaptive_mode == AdaptiveMode::on      ? "on"
                                                                  : "off";
    os << "emf.adaptive = " << am << "\n";
    os << "emf.adaptive_c = " << fmt(cfg.obj.adaptive_c) << "\n";
    os << "emf.adaptive_p = " << fmt(cfg.obj.adaptive_p) << "\n";
    os << "emf.time_weight = " << (cfg.obj.time_weight ? "true" : "false") << "\n";
    os << "emf.time_weight_use_r = " << (cfg.obj.time_weight_use_r ? "true" : "false") << "\n";
    os << "emf.mu1 = " << fmt(cfg.obj.mu1) << "\n";
    os << "emf.mu2 = " << fmt(cfg.obj.mu2) << "\n";

    os << "cfg.enabled = " << (cfg.obj.guidance.enabled ? "true" : "false") << "\n";
    os << "cfg.w = " << fmt(cfg.obj.guidance.w) << "\n";
    os << "cfg.k = " << fmt(cfg.obj.guidance.k) << "\n";
    os << "cfg.dropout_prob = " << fmt(cfg.obj.guidance.dropout_prob) << "\n";

    os << "time.dist = " << (cfg.times.dist == TimeDist::uniform ? "uniform" : "lognormal") << "\n";
    os << "time.mu = " << fmt(cfg.times.mu) << "\n";
    os << "time.sigma = " << fmt(cfg.times.sigma) << "\n";
    os << "time.alpha = " << fmt(cfg.times.alpha) << "\n";

    os << "opt.lr = " << fmt(cfg.adam.lr) << "\n";
    os << "opt.beta1 = " << fmt(cfg.adam.beta1) << "\n";
    os << "opt.beta2 = " << fmt(cfg.adam.beta2) << "\n";
    os << "opt.eps = " << fmt(cfg.adam.eps) << "\n";
    os << "opt.weight_decay = " << fmt(cfg.adam.weight_decay) << "\n";
    os << "opt.steps = " << cfg.steps << "\n";
    os << "opt.batch = " << cfg.batch << "\n";
    os << "opt.ema_decay = " << fmt(cfg.ema_decay) << "\n";

    os << "log.every = " << cfg.log_every << "\n";
    os << "log.checkpoint_every = " << cfg.checkpoint_every << "\n";
    os << "log.eval_points = " << cfg.eval_points << "\n";
    return os.str();
}

} // namespace emf

#include "ehfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

const ConfigKey* lookup(const std::string& key) {
    for (const auto& k : config_schema())
        if (k.key == key) return &k;
    return nullptr;
}

void check_known(const ConfigValues& values) {
    for (const auto& [k, v] : values)
        if (!lookup(k)) throw ConfigError(k, "unknown configuration key");
}

// Typed accessors with field-level diagnostics.
class Reader {
public:
    explicit Reader(const ConfigValues& v) : values_(v) {}

    const std::string& str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError(key, "missing value");
        return it->second;
    }

    double real(const std::string& key) const {
        const auto& s = str(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key, "expected a real number, got '" + s + "'");
        }
    }

    std::uint64_t integer(const std::string& key) const { return parse_uint(key, str(key)); }

    std::size_t count(const std::string& key) const { return static_cast<std::size_t>(integer(key)); }

    bool flag(const std::string& key) const {
        const auto& s = str(key);
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw ConfigError(key, "expected true or false, got '" + s + "'");
    }

    static std::uint64_t parse_uint(const std::string& key, const std::string& s) {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
        return v;
    }

private:
    const ConfigValues& values_;
};

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : split(text, ',')) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            seeds.push_back(Reader::parse_uint(key, item));
            continue;
        }
        const auto lo = Reader::parse_uint(key, trim(item.substr(0, dots)));
        const auto hi = Reader::parse_uint(key, trim(item.substr(dots + 2)));
        if (hi < lo) throw ConfigError(key, "range '" + item + "' is empty");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (seeds.empty()) throw ConfigError(key, "at least one seed is required");
    return seeds;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"experiment.name", "custom", "experiment name, also the output subdirectory"},
        {"experiment.rounds", "100", "number of rounds T"},
        {"experiment.seeds", "1", "comma-separated seeds; a..b ranges allowed"},
        {"experiment.mode", "parallel", "parallel (K = 1) or local (K > 1)"},
        {"experiment.local_steps", "1", "local SGD steps K per round"},
        {"experiment.batch_size", "1", "mini-batch size per local step"},
        {"experiment.warmup", "50", "rounds excluded from n_t statistics"},
        {"experiment.final_window", "1", "final loss is averaged over this many last models"},
        {"experiment.track_drift", "false", "record client drift per round"},
        {"experiment.strict_feasibility", "false", "fail when a theorem-rule stepsize is infeasible"},
        {"experiment.output_dir", "out", "output directory (EHFL_OUTPUT_DIR overrides)"},
        {"experiment.jobs", "0", "parallel jobs; 0 uses every hardware thread"},
        {"task.kind", "quadratic", "quadratic or logistic"},
        {"task.dim", "10", "model dimension d"},
        {"task.samples", "1000", "dataset size N (multiple of energy.clients)"},
        {"task.seed", "1", "task generation seed"},
        {"task.condition_number", "10", "quadratic: ratio of extreme eigenvalues"},
        {"task.smoothness", "1", "quadratic: largest eigenvalue L"},
        {"task.noise_std", "1", "quadratic: target noise level"},
        {"task.mu", "0.01", "logistic: l2 regularization"},
        {"task.feature_scale", "1", "logistic: feature norm scale"},
        {"task.signal", "2", "logistic: margin scale of the label model"},
        {"energy.clients", "10", "number of clients M"},
        {"energy.arrival_rate", "0.5", "homogeneous Bernoulli arrival rate"},
        {"energy.arrival_rates", "", "per-client rates (overrides arrival_rate)"},
        {"energy.capacity", "10", "battery capacity E_max, or inf"},
        {"energy.initial_level", "1", "initial battery level of every client"},
        {"scheduler.kind", "myopic", "myopic, round_robin, greedy or oracle"},
        {"scheduler.lambda_total", "5", "Lambda for myopic and round_robin"},
        {"scheduler.oracle_n", "5", "clients per round for the oracle scheduler"},
        {"compare.schedulers", "myopic,greedy,round_robin", "schedulers compared by `compare`"},
        {"stepsize.rule", "theorem", "theorem or experiment"},
        {"stepsize.eta", "0", "theorem rule: base stepsize eta"},
        {"stepsize.eta_fraction", "0.5", "theorem rule: eta as a fraction of the admissible maximum (0 = use eta)"},
        {"stepsize.eta0", "0.15", "experiment rule: nominal stepsize"},
        {"stepsize.decay_period", "10", "experiment rule: rounds between decays"},
        {"stepsize.decay_rate", "0.99", "experiment rule: decay factor"},
        {"stepsize.window", "10", "experiment rule: normalization window"},
        {"bounds.check", "false", "evaluate the convergence bound against the traces"},
        {"bounds.assert", "false", "exit with code 3 when the bound check fails"},
        {"bounds.sigma_probes", "10", "probe points for the sigma^2 estimate"},
        {"bounds.sigma_samples", "0", "samples per probe; 0 = exact over the dataset"},
    };
    return schema;
}

ConfigValues parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config", e.message() + " at line " + std::to_string(e.line()));
    }
    ConfigValues out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(section, "keys must live inside a [section]");
        for (const auto& [key, node] : body) out[section + "." + key] = trim(node.get_value<std::string>());
    }
    check_known(out);
    return out;
}

ConfigValues load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    return parse_config(in);
}

ConfigValues merge_config(ConfigValues base, const ConfigValues& overrides) {
    check_known(base);
    check_known(overrides);
    for (const auto& [k, v] : overrides) base[k] = v;
    return base;
}

ConfigValues with_defaults(const ConfigValues& values) {
    ConfigValues out;
    for (const auto& k : config_schema()) out[k.key] = k.default_value;
    return merge_config(std::move(out), values);
}

std::string format_config(const ConfigValues& values) {
    std::string out, section;
    for (const auto& [k, v] : values) {
        const auto dot = k.find('.');
        const auto sec = k.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += k.substr(dot + 1) + " = " + v + "\n";
    }
    return out;
}

std::string config_hash(const ConfigValues& values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : values) {
        for (char c : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SchedulerKind parse_scheduler(const std::string& name, std::size_t lambda_total, std::size_t oracle_n) {
    if (name == "myopic") return Myopic{lambda_total};
    if (name == "round_robin") return RoundRobin{lambda_total};
    if (name == "greedy") return Greedy{};
    if (name == "oracle") return OracleUniform{oracle_n};
    throw ConfigError("scheduler.kind", "unknown scheduler '" + name + "'");
}

std::size_t scheduler_cap(const SchedulerKind& kind, std::size_t num_clients) {
    if (const auto* k = std::get_if<Myopic>(&kind)) return k->lambda_total;
    if (const auto* k = std::get_if<RoundRobin>(&kind)) return k->lambda_total;
    if (const auto* k = std::get_if<OracleUniform>(&kind)) return k->n;
    return num_clients;
}

ExperimentConfig build_experiment_config(const ConfigValues& raw) {
    ExperimentConfig cfg;
    cfg.values = with_defaults(raw);
    cfg.hash = config_hash(cfg.values);
    const Reader r(cfg.values);

    cfg.name = r.str("experiment.name");
    if (cfg.name.empty() || cfg.name.find('/') != std::string::npos)
        throw ConfigError("experiment.name", "must be a non-empty name without '/'");
    cfg.rounds = r.count("experiment.rounds");
    cfg.seeds = parse_seeds("experiment.seeds", r.str("experiment.seeds"));
    cfg.local_steps = r.count("experiment.local_steps");
    const auto& mode = r.str("experiment.mode");
    if (mode == "parallel")
        cfg.mode = SgdMode::Parallel;
    else if (mode == "local")
        cfg.mode = SgdMode::Local;
    else
        throw ConfigError("experiment.mode", "expected parallel or local");
    if (cfg.mode == SgdMode::Parallel && cfg.local_steps != 1)
        throw ConfigError("experiment.local_steps", "parallel mode requires local_steps = 1");
    if (cfg.mode == SgdMode::Local && cfg.local_steps < 2)
        throw ConfigError("experiment.local_steps", "local mode requires local_steps > 1");
    cfg.batch_size = r.count("experiment.batch_size");
    cfg.warmup = r.count("experiment.warmup");
    cfg.final_window = r.count("experiment.final_window");
    if (cfg.final_window == 0) throw ConfigError("experiment.final_window", "must be positive");
    cfg.track_drift = r.flag("experiment.track_drift");
    cfg.strict_feasibility = r.flag("experiment.strict_feasibility");
    cfg.output_dir = r.str("experiment.output_dir");
    cfg.jobs = r.count("experiment.jobs");

    // Task.
    const auto& kind = r.str("task.kind");
    const std::size_t clients = r.count("energy.clients");
    if (clients == 0) throw ConfigError("energy.clients", "must be positive");
    const std::size_t dim = r.count("task.dim"), samples = r.count("task.samples");
    const std::uint64_t task_seed = r.integer("task.seed");
    if (dim == 0) throw ConfigError("task.dim", "must be positive");
    if (samples == 0 || samples % clients != 0)
        throw ConfigError("task.samples", "must be a positive multiple of energy.clients");
    if (kind == "quadratic") {
        cfg.task.kind = TaskKind::Quadratic;
        auto& q = cfg.task.quadratic;
        q.dim = dim;
        q.samples = samples;
        q.clients = clients;
        q.seed = task_seed;
        q.condition_number = r.real("task.condition_number");
        q.smoothness = r.real("task.smoothness");
        q.noise_std = r.real("task.noise_std");
        if (samples < dim) throw ConfigError("task.samples", "must be at least task.dim");
        if (!(q.condition_number >= 1.0)) throw ConfigError("task.condition_number", "must be >= 1");
        if (!(q.smoothness > 0.0)) throw ConfigError("task.smoothness", "must be positive");
        if (!(q.noise_std >= 0.0)) throw ConfigError("task.noise_std", "must be non-negative");
    } else if (kind == "logistic") {
        cfg.task.kind = TaskKind::Logistic;
        auto& l = cfg.task.logistic;
        l.dim = dim;
        l.samples = samples;
        l.clients = clients;
        l.seed = task_seed;
        l.mu = r.real("task.mu");
        l.feature_scale = r.real("task.feature_scale");
        l.signal = r.real("task.signal");
        if (!(l.mu >= 0.0)) throw ConfigError("task.mu", "must be non-negative");
        if (!(l.feature_scale > 0.0)) throw ConfigError("task.feature_scale", "must be positive");
    } else {
        throw ConfigError("task.kind", "expected quadratic or logistic");
    }
    if (cfg.batch_size == 0 || cfg.batch_size > samples / clients)
        throw ConfigError("experiment.batch_size", "must be between 1 and task.samples / energy.clients");

    // Energy.
    std::optional<int> capacity;
    if (r.str("energy.capacity") != "inf") {
        const auto cap = r.integer("energy.capacity");
        if (cap == 0 || cap > 1000000) throw ConfigError("energy.capacity", "must be a positive integer or inf");
        capacity = static_cast<int>(cap);
    }
    const auto level = r.integer("energy.initial_level");
    if (level > 1000000) throw ConfigError("energy.initial_level", "too large");
    cfg.energy = EnergyConfig::homogeneous(clients, r.real("energy.arrival_rate"), capacity, static_cast<int>(level));
    if (!r.str("energy.arrival_rates").empty()) {
        cfg.energy.arrival_rates.clear();
        for (const auto& item : split(r.str("energy.arrival_rates"), ',')) {
            try {
                cfg.energy.arrival_rates.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("energy.arrival_rates", "bad rate '" + item + "'");
            }
        }
    }
    cfg.energy.validate();

    // Scheduler.
    const std::size_t lambda_total = r.count("scheduler.lambda_total");
    const std::size_t oracle_n = r.count("scheduler.oracle_n");
    cfg.scheduler = parse_scheduler(r.str("scheduler.kind"), lambda_total, oracle_n);
    validate_scheduler(cfg.scheduler, clients);
    for (const auto& name : split(r.str("compare.schedulers"), ',')) {
        try {
            cfg.compare_schedulers.push_back(parse_scheduler(name, lambda_total, oracle_n));
            validate_scheduler(cfg.compare_schedulers.back(), clients);
        } catch (const ConfigError& e) {
            throw ConfigError("compare.schedulers", e.what());
        }
    }

    // Stepsize.
    const auto& rule = r.str("stepsize.rule");
    if (rule == "theorem") {
        cfg.stepsize.theorem_rule = true;
        cfg.stepsize.eta = r.real("stepsize.eta");
        cfg.stepsize.eta_fraction = r.real("stepsize.eta_fraction");
        if (cfg.stepsize.eta_fraction < 0.0 || cfg.stepsize.eta_fraction > 1.0)
            throw ConfigError("stepsize.eta_fraction", "must lie in [0, 1]");
        if (cfg.stepsize.eta_fraction == 0.0 && !(cfg.stepsize.eta > 0.0))
            throw ConfigError("stepsize.eta", "must be positive when eta_fraction is 0");
    } else if (rule == "experiment") {
        cfg.stepsize.theorem_rule = false;
        auto& e = cfg.stepsize.experiment;
        e.eta0 = r.real("stepsize.eta0");
        e.decay_period = r.count("stepsize.decay_period");
        e.decay_rate = r.real("stepsize.decay_rate");
        e.window = r.count("stepsize.window");
        if (!(e.eta0 > 0.0)) throw ConfigError("stepsize.eta0", "must be positive");
        if (e.decay_period == 0) throw ConfigError("stepsize.decay_period", "must be positive");
        if (!(e.decay_rate > 0.0 && e.decay_rate <= 1.0)) throw ConfigError("stepsize.decay_rate", "must lie in (0, 1]");
        if (e.window == 0) throw ConfigError("stepsize.window", "must be positive");
        // Fallback modulation for windows without participants: 1 / sqrt(E[n_t]).
        e.c = 1.0 / std::sqrt(static_cast<double>(scheduler_cap(cfg.scheduler, clients)));
    } else {
        throw ConfigError("stepsize.rule", "expected theorem or experiment");
    }

    cfg.bound_check = r.flag("bounds.check");
    cfg.bound_assert = r.flag("bounds.assert");
    cfg.sigma_probes = r.count("bounds.sigma_probes");
    cfg.sigma_samples = r.count("bounds.sigma_samples");
    if (cfg.bound_check && !cfg.stepsize.theorem_rule)
        throw ConfigError("bounds.check", "bound checks need stepsize.rule = theorem");
    if (cfg.bound_check && cfg.sigma_probes < 10) throw ConfigError("bounds.sigma_probes", "at least 10 probes");
    return cfg;
}

// ---------------------------------------------------------------------------

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = {
        {"smoke", "tiny quadratic, 4 clients, 50 rounds, 2 seeds",
         {{"experiment.name", "smoke"},
          {"experiment.rounds", "50"},
          {"experiment.seeds", "1,2"},
          {"experiment.batch_size", "4"},
          {"experiment.warmup", "0"},
          {"task.kind", "quadratic"},
          {"task.dim", "2"},
          {"task.samples", "40"},
          {"task.condition_number", "4"},
          {"task.noise_std", "0.5"},
          {"task.seed", "7"},
          {"energy.clients", "4"},
          {"energy.arrival_rate", "0.5"},
          {"scheduler.kind", "myopic"},
          {"scheduler.lambda_total", "2"},
          {"compare.schedulers", "myopic,greedy,round_robin"},
          {"stepsize.rule", "theorem"},
          {"stepsize.eta_fraction", "0.5"},
          {"bounds.check", "true"}}},
        {"paper_fig2_synthetic",
         "logistic stand-in for the CIFAR-10 scheduler comparison: M=10, K=5, Lambda=5, batch 50",
         {{"experiment.name", "paper_fig2_synthetic"},
          {"experiment.rounds", "500"},
          {"experiment.seeds", "1..20"},
          {"experiment.mode", "local"},
          {"experiment.local_steps", "5"},
          {"experiment.batch_size", "50"},
          {"experiment.warmup", "50"},
          {"experiment.final_window", "50"},
          {"task.kind", "logistic"},
          {"task.dim", "100"},
          {"task.samples", "10000"},
          {"task.mu", "0.01"},
          {"task.feature_scale", "5"},
          {"task.signal", "2"},
          {"task.seed", "2024"},
          {"energy.clients", "10"},
          {"energy.arrival_rate", "0.5"},
          {"energy.capacity", "3"},
          {"energy.initial_level", "1"},
          {"scheduler.kind", "myopic"},
          {"scheduler.lambda_total", "5"},
          {"compare.schedulers", "myopic,greedy,round_robin"},
          {"stepsize.rule", "experiment"},
          {"stepsize.eta0", "0.15"},
          {"stepsize.decay_period", "10"},
          {"stepsize.decay_rate", "0.99"},
          {"stepsize.window", "10"}}},
        {"theorem1_quadratic", "parallel SGD on a d=10 quadratic, theorem-rule stepsize at half the maximum",
         {{"experiment.name", "theorem1_quadratic"},
          {"experiment.rounds", "1000"},
          {"experiment.seeds", "1..20"},
          {"experiment.batch_size", "50"},
          {"task.kind", "quadratic"},
          {"task.dim", "10"},
          {"task.samples", "1000"},
          {"task.condition_number", "10"},
          {"task.noise_std", "1"},
          {"task.seed", "11"},
          {"energy.clients", "10"},
          {"energy.arrival_rate", "0.6"},
          {"scheduler.kind", "myopic"},
          {"scheduler.lambda_total", "5"},
          {"stepsize.rule", "theorem"},
          {"stepsize.eta_fraction", "0.5"},
          {"bounds.check", "true"}}},
        {"theorem2_quadratic", "local SGD (K=5) on a d=10 quadratic, theorem-rule stepsize at half the maximum",
         {{"experiment.name", "theorem2_quadratic"},
          {"experiment.rounds", "1000"},
          {"experiment.seeds", "1..20"},
          {"experiment.mode", "local"},
          {"experiment.local_steps", "5"},
          {"experiment.batch_size", "50"},
          {"task.kind", "quadratic"},
          {"task.dim", "10"},
          {"task.samples", "1000"},
          {"task.condition_number", "10"},
          {"task.noise_std", "1"},
          {"task.seed", "11"},
          {"energy.clients", "10"},
          {"energy.arrival_rate", "0.6"},
          {"scheduler.kind", "myopic"},
          {"scheduler.lambda_total", "5"},
          {"stepsize.rule", "theorem"},
          {"stepsize.eta_fraction", "0.5"},
          {"bounds.check", "true"}}},
    };
    return all;
}

const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return p;
    throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace ehfl

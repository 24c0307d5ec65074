#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "ehfl/energy.hpp"
#include "ehfl/fl_core.hpp"
#include "ehfl/scheduler.hpp"
#include "ehfl/tasks.hpp"

namespace ehfl {

/// Flat "section.key" -> value map. Every key must appear in config_schema().
using ConfigValues = std::map<std::string, std::string>;

struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string help;
};

const std::vector<ConfigKey>& config_schema();

/// Parses the INI-style file format: `[section]` headers and `key = value` lines.
ConfigValues parse_config(std::istream& in);
ConfigValues load_config_file(const std::string& path);

/// Applies `overrides` on top of `base`; both are checked against the schema.
ConfigValues merge_config(ConfigValues base, const ConfigValues& overrides);

/// Schema defaults, then a preset (if any), then file values, then overrides.
ConfigValues with_defaults(const ConfigValues& values);

std::string format_config(const ConfigValues& values);

/// 16 hex digits of FNV-1a over the canonical `key=value` lines of the resolved config.
std::string config_hash(const ConfigValues& values);

enum class TaskKind { Quadratic, Logistic };

struct TaskConfig {
    TaskKind kind = TaskKind::Quadratic;
    QuadraticSpec quadratic;
    LogisticSpec logistic;
};

struct StepsizeConfig {
    bool theorem_rule = true;
    double eta = 0.0;           // explicit base stepsize, used when eta_fraction == 0
    double eta_fraction = 0.0;  // eta = fraction * admissible maximum for the scheduler's n cap
    ExperimentRule experiment;
};

struct ExperimentConfig {
    std::string name;
    TaskConfig task;
    EnergyConfig energy;
    SchedulerKind scheduler = Greedy{};
    std::vector<SchedulerKind> compare_schedulers;
    SgdMode mode = SgdMode::Parallel;
    std::size_t local_steps = 1;
    StepsizeConfig stepsize;
    std::size_t rounds = 0;
    std::vector<std::uint64_t> seeds;
    std::size_t batch_size = 1;
    std::size_t warmup = 0;
    std::size_t final_window = 1;
    bool track_drift = false;
    bool strict_feasibility = false;
    bool bound_check = false;
    bool bound_assert = false;
    std::size_t sigma_probes = 10;
    std::size_t sigma_samples = 0;  // 0 = exact over the dataset
    std::string output_dir;
    std::size_t jobs = 0;  // 0 = hardware concurrency

    ConfigValues values;  // resolved key/value form
    std::string hash;
};

/// Builds and cross-validates a config; throws ConfigError naming the field.
ExperimentConfig build_experiment_config(const ConfigValues& values);

SchedulerKind parse_scheduler(const std::string& name, std::size_t lambda_total, std::size_t oracle_n);

/// Largest n_t the scheduler can produce with M clients.
std::size_t scheduler_cap(const SchedulerKind& kind, std::size_t num_clients);

struct Preset {
    std::string name;
    std::string description;
    ConfigValues values;
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);

}  // namespace ehfl

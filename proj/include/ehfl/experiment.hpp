#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehfl/bounds.hpp"
#include "ehfl/config.hpp"
#include "ehfl/fl_core.hpp"
#include "ehfl/stats.hpp"
#include "ehfl/tasks.hpp"

namespace ehfl {

std::unique_ptr<Task> build_task(const TaskConfig& config);

/// Base stepsize for the theorem rule: either the explicit eta or eta_fraction times
/// the admissible maximum, with n_max taken as the scheduler's cap on n_t.
double resolved_eta(const ExperimentConfig& config, const Task& task, const SchedulerKind& scheduler);

TrainingConfig training_config(const ExperimentConfig& config, const Task& task, const SchedulerKind& scheduler,
                               std::uint64_t seed);

struct SeedRun {
    std::uint64_t seed = 0;
    TrainingResult result;
    double final_loss = 0.0;
    double avg_grad_norm_sq = 0.0;
};

struct ArmResult {
    SchedulerKind scheduler;
    std::string name;
    std::vector<SeedRun> runs;  // in config seed order
};

/// Mean of f over the last `window` models x_{T-window+1}, ..., x_T.
double final_loss(const Task& task, const TrainingResult& result, std::size_t window);
double average_grad_norm_sq(std::span<const RoundRecord> records);

/// Runs every seed of one scheduler arm; seeds are spread over `config.jobs` threads.
ArmResult run_arm(const ExperimentConfig& config, const Task& task, const SchedulerKind& scheduler);

struct ParticipationStats {
    std::map<std::size_t, std::size_t> histogram;
    double mean = 0.0;
    std::size_t min = 0;
    std::size_t max = 0;
    double fraction_at_cap = 0.0;          // share of rounds with n_t equal to the scheduler cap
    std::optional<double> uniformity;      // empty when a round had no participants
    std::size_t rounds = 0;
};

/// Participation statistics over rounds [warmup, T); warmup is clamped below T.
ParticipationStats participation_stats(std::span<const RoundRecord> records, std::size_t warmup, std::size_t cap);

/// Evaluates the theorem bound for the arm's traces (theorem stepsize rule only).
/// Throws EmptyRound when a trace has a round without participants.
BoundReport arm_bound_report(const ExperimentConfig& config, const Task& task, const ArmResult& arm);

nlohmann::json bound_report_json(const BoundReport& report);
nlohmann::json summarize_arm(const ExperimentConfig& config, const Task& task, const ArmResult& arm);

struct RunOutcome {
    ArmResult arm;
    nlohmann::json summary;
    bool bound_failed = false;
    std::string directory;
};

/// `EHFL_OUTPUT_DIR` if set, else experiment.output_dir; the experiment name is appended.
std::string output_directory(const ExperimentConfig& config);

/// Runs the configured scheduler over every seed and writes one trace per seed,
/// summary.json and task.json (task constants) into the output directory.
RunOutcome run_experiment(const ExperimentConfig& config);

struct PairComparison {
    std::string first;
    std::string second;
    SignTest final_loss;      // wins = seeds where `first` has the lower final loss
    SignTest avg_grad_norm_sq;
    double mean_loss_difference = 0.0;  // mean(first - second)
};

struct ComparisonReport {
    std::vector<ArmResult> arms;
    std::vector<PairComparison> pairs;  // every ordered pair i < j in input order
    nlohmann::json summary;
};

/// Paired-seed comparison: every arm sees the same arrival realizations per seed.
ComparisonReport compare_schedulers(const ExperimentConfig& config, const Task& task,
                                    std::span<const SchedulerKind> schedulers);

/// compare_schedulers plus traces, comparison.json and plot_<metric>.tsv files.
ComparisonReport run_comparison(const ExperimentConfig& config, std::span<const SchedulerKind> schedulers);

enum class PlotMetric { Loss, GradNormSq, Participants, Stepsize };

PlotMetric parse_plot_metric(const std::string& name);
std::string to_string(PlotMetric metric);

struct PlotGroup {
    std::string name;
    std::vector<std::vector<RoundRecord>> traces;
};

/// Tab-separated columns: round, then <group>_mean and <group>_std across traces.
/// Each trace is first smoothed with a trailing mean over `window` rounds.
/// Throws ShapeMismatch when traces differ in length.
void emit_plot_data(std::ostream& out, std::span<const PlotGroup> groups, PlotMetric metric, std::size_t window);

}  // namespace ehfl

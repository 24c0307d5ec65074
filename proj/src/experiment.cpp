#include "ehfl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "ehfl/errors.hpp"
#include "ehfl/task_io.hpp"
#include "ehfl/trace.hpp"

namespace ehfl {
namespace {

namespace fs = std::filesystem;

template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& body) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

std::vector<std::size_t> n_sequence(std::span<const RoundRecord> records) {
    std::vector<std::size_t> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.n_t);
    return out;
}

double metric_value(const RoundRecord& r, PlotMetric metric) {
    switch (metric) {
        case PlotMetric::Loss: return r.loss;
        case PlotMetric::GradNormSq: return r.grad_norm_sq;
        case PlotMetric::Participants: return static_cast<double>(r.n_t);
        case PlotMetric::Stepsize: return r.eta_t;
    }
    return 0.0;
}

std::string trace_name(const std::string& scheduler, std::uint64_t seed) {
    return "trace_" + scheduler + "_seed" + std::to_string(seed) + ".csv";
}

void write_arm_traces(const ExperimentConfig& config, const ArmResult& arm, const fs::path& dir) {
    for (const auto& run : arm.runs) {
        TraceHeader h;
        h.config_hash = config.hash;
        h.seed = run.seed;
        h.scheduler = arm.name;
        h.clients = config.energy.num_clients;
        h.rounds = run.result.records.size();
        h.drift = config.track_drift;
        h.non_causal = std::holds_alternative<OracleUniform>(arm.scheduler);
        write_trace_file((dir / trace_name(arm.name, run.seed)).string(), h, run.result.records);
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

nlohmann::json sign_test_json(const SignTest& s) {
    return {{"wins", s.wins}, {"losses", s.losses}, {"ties", s.ties}, {"p_value", s.p_value}};
}

}  // namespace

std::unique_ptr<Task> build_task(const TaskConfig& config) {
    if (config.kind == TaskKind::Quadratic) return std::make_unique<QuadraticTask>(generate_quadratic(config.quadratic));
    return std::make_unique<LogisticTask>(generate_logistic(config.logistic));
}

double resolved_eta(const ExperimentConfig& config, const Task& task, const SchedulerKind& scheduler) {
    if (config.stepsize.eta_fraction == 0.0) return config.stepsize.eta;
    const std::size_t cap = scheduler_cap(scheduler, config.energy.num_clients);
    return config.stepsize.eta_fraction *
           max_feasible_eta(config.mode, task.smoothness(), config.local_steps, cap, config.rounds);
}

TrainingConfig training_config(const ExperimentConfig& config, const Task& task, const SchedulerKind& scheduler,
                               std::uint64_t seed) {
    TrainingConfig tc;
    tc.energy = config.energy;
    tc.scheduler = scheduler;
    tc.local_steps = config.local_steps;
    if (config.stepsize.theorem_rule)
        tc.stepsize = TheoremRule{resolved_eta(config, task, scheduler), config.rounds};
    else
        tc.stepsize = config.stepsize.experiment;
    tc.rounds = config.rounds;
    tc.seed = seed;
    tc.batch_size = config.batch_size;
    tc.track_drift = config.track_drift;
    tc.strict_feasibility = config.strict_feasibility;
    tc.initial_model = ModelVector::Zero(task.dimension());
    return tc;
}

double final_loss(const Task& task, const TrainingResult& result, std::size_t window) {
    const auto& recs = result.records;
    window = std::max<std::size_t>(1, std::min(window, recs.size() + 1));
    double acc = task.loss(result.final_model);
    for (std::size_t k = 1; k < window; ++k) acc += recs[recs.size() - k].loss;
    return acc / static_cast<double>(window);
}

double average_grad_norm_sq(std::span<const RoundRecord> records) {
    if (records.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& r : records) acc += r.grad_norm_sq;
    return acc / static_cast<double>(records.size());
}

ArmResult run_arm(const ExperimentConfig& config, const Task& task, const SchedulerKind& scheduler) {
    ArmResult arm;
    arm.scheduler = scheduler;
    arm.name = scheduler_name(scheduler);
    arm.runs.resize(config.seeds.size());
    parallel_for(config.seeds.size(), config.jobs, [&](std::size_t k) {
        SeedRun& run = arm.runs[k];
        run.seed = config.seeds[k];
        run.result = run_training(task, training_config(config, task, scheduler, run.seed));
        run.final_loss = final_loss(task, run.result, config.final_window);
        run.avg_grad_norm_sq = average_grad_norm_sq(run.result.records);
    });
    return arm;
}

ParticipationStats participation_stats(std::span<const RoundRecord> records, std::size_t warmup, std::size_t cap) {
    ParticipationStats s;
    if (records.empty()) return s;
    warmup = std::min(warmup, records.size() - 1);
    const auto n = n_sequence(records.subspan(warmup));
    s.rounds = n.size();
    s.histogram = histogram(n);
    s.min = *std::min_element(n.begin(), n.end());
    s.max = *std::max_element(n.begin(), n.end());
    s.mean = std::accumulate(n.begin(), n.end(), 0.0) / static_cast<double>(n.size());
    s.fraction_at_cap =
        static_cast<double>(std::count(n.begin(), n.end(), cap)) / static_cast<double>(n.size());
    if (s.min > 0) s.uniformity = uniformity_ratio(n);
    return s;
}

BoundReport arm_bound_report(const ExperimentConfig& config, const Task& task, const ArmResult& arm) {
    if (!config.stepsize.theorem_rule) throw ConfigError("stepsize.rule", "bound checks need the theorem rule");
    const ModelVector x0 = ModelVector::Zero(task.dimension());
    const std::uint64_t probe_seed =
        config.task.kind == TaskKind::Quadratic ? config.task.quadratic.seed : config.task.logistic.seed;
    const auto probes = probe_points(task, x0, config.sigma_probes, probe_seed);
    const std::size_t samples = config.sigma_samples == 0 ? task.num_samples() : config.sigma_samples;
    const NoiseProfile noise = estimate_sigma_sq(task, probes, samples, probe_seed);

    BoundParams p;
    p.L = task.smoothness();
    p.sigma_sq = noise.sigma_sq;
    p.f0_gap = std::max(0.0, task.loss(x0) - task.optimal_value());
    p.K = config.local_steps;
    p.eta = resolved_eta(config, task, arm.scheduler);
    std::vector<std::vector<RoundRecord>> traces;
    for (const auto& run : arm.runs) traces.push_back(run.result.records);
    const BoundKind kind = config.local_steps == 1 ? BoundKind::Theorem1 : BoundKind::Theorem2;
    return check_trace_against_bound(traces, p, kind);
}

nlohmann::json bound_report_json(const BoundReport& r) {
    nlohmann::json terms = nlohmann::json::object();
    for (const auto& t : r.terms) terms[t.name] = t.value;
    nlohmann::json j = {
        {"theorem", to_string(r.kind)},
        {"bound_value", r.bound_value},
        {"terms", terms},
        {"feasible", r.feasible},
        {"max_eta", r.max_eta},
        {"params",
         {{"L", r.params.L},
          {"sigma_sq", r.params.sigma_sq},
          {"f0_gap", r.params.f0_gap},
          {"n_min", r.params.n_min},
          {"n_max", r.params.n_max},
          {"K", r.params.K},
          {"T", r.params.T},
          {"eta", r.params.eta}}},
    };
    if (r.measured_avg_grad_sq) j["measured_avg_grad_sq"] = *r.measured_avg_grad_sq;
    if (r.measured_worst_grad_sq) j["measured_worst_grad_sq"] = *r.measured_worst_grad_sq;
    if (r.satisfied) j["satisfied"] = *r.satisfied;
    if (r.seeds) j["seeds"] = r.seeds;
    return j;
}

nlohmann::json summarize_arm(const ExperimentConfig& config, const Task& task, const ArmResult& arm) {
    const std::size_t cap = scheduler_cap(arm.scheduler, config.energy.num_clients);
    nlohmann::json seeds = nlohmann::json::array();
    std::vector<double> losses, grads;
    std::vector<RoundRecord> pooled;
    for (const auto& run : arm.runs) {
        const auto stats = participation_stats(run.result.records, config.warmup, cap);
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [n, c] : stats.histogram) hist[std::to_string(n)] = c;
        seeds.push_back({
            {"seed", run.seed},
            {"final_loss", run.final_loss},
            {"avg_grad_norm_sq", run.avg_grad_norm_sq},
            {"n_histogram", hist},
            {"n_mean", stats.mean},
            {"fraction_at_cap", stats.fraction_at_cap},
            {"uniformity_ratio", stats.uniformity ? nlohmann::json(*stats.uniformity) : nlohmann::json(nullptr)},
            {"warnings", run.result.warnings},
        });
        losses.push_back(run.final_loss);
        grads.push_back(run.avg_grad_norm_sq);
        const std::size_t skip = std::min(config.warmup, run.result.records.empty() ? 0 : run.result.records.size() - 1);
        pooled.insert(pooled.end(), run.result.records.begin() + static_cast<std::ptrdiff_t>(skip),
                      run.result.records.end());
    }
    const auto all = participation_stats(pooled, 0, cap);
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [n, c] : all.histogram) hist[std::to_string(n)] = c;
    return {
        {"scheduler", arm.name},
        {"seeds", seeds},
        {"mean_final_loss", mean(losses)},
        {"std_final_loss", stddev(losses)},
        {"mean_avg_grad_norm_sq", mean(grads)},
        {"f_star", task.optimal_value()},
        {"n_histogram", hist},
        {"n_mean", all.mean},
        {"fraction_at_cap", all.fraction_at_cap},
        {"uniformity_ratio", all.uniformity ? nlohmann::json(*all.uniformity) : nlohmann::json(nullptr)},
    };
}

std::string output_directory(const ExperimentConfig& config) {
    const char* env = std::getenv("EHFL_OUTPUT_DIR");
    const fs::path base = env && *env ? fs::path(env) : fs::path(config.output_dir);
    return (base / config.name).string();
}

RunOutcome run_experiment(const ExperimentConfig& config) {
    const auto task = build_task(config.task);
    RunOutcome out;
    out.directory = output_directory(config);
    fs::create_directories(out.directory);
    out.arm = run_arm(config, *task, config.scheduler);

    out.summary = {
        {"name", config.name},
        {"config_hash", config.hash},
        {"artifact_version", kArtifactVersion},
        {"rounds", config.rounds},
        {"result", summarize_arm(config, *task, out.arm)},
    };
    if (config.bound_check) {
        try {
            const auto report = arm_bound_report(config, *task, out.arm);
            out.summary["bound"] = bound_report_json(report);
            out.bound_failed = !report.satisfied.value_or(false);
        } catch (const EmptyRound& e) {
            out.summary["bound"] = {{"applicable", false}, {"reason", e.what()}};
            out.bound_failed = true;
        }
    }
    write_arm_traces(config, out.arm, out.directory);
    write_json(fs::path(out.directory) / "summary.json", out.summary);
    write_json(fs::path(out.directory) / "task.json", task_summary_json(*task));
    {
        std::ofstream cfg_out(fs::path(out.directory) / "config.ini");
        cfg_out << format_config(config.values);
    }
    return out;
}

ComparisonReport compare_schedulers(const ExperimentConfig& config, const Task& task,
                                    std::span<const SchedulerKind> schedulers) {
    if (schedulers.empty()) throw ConfigError("compare.schedulers", "at least one scheduler is required");
    ComparisonReport report;
    for (const auto& s : schedulers) report.arms.push_back(run_arm(config, task, s));

    nlohmann::json arms = nlohmann::json::array();
    for (const auto& arm : report.arms) arms.push_back(summarize_arm(config, task, arm));

    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i < report.arms.size(); ++i) {
        for (std::size_t j = i + 1; j < report.arms.size(); ++j) {
            const auto& a = report.arms[i];
            const auto& b = report.arms[j];
            std::vector<double> la, lb, ga, gb;
            double diff = 0.0;
            for (std::size_t k = 0; k < a.runs.size(); ++k) {
                la.push_back(a.runs[k].final_loss);
                lb.push_back(b.runs[k].final_loss);
                ga.push_back(a.runs[k].avg_grad_norm_sq);
                gb.push_back(b.runs[k].avg_grad_norm_sq);
                diff += a.runs[k].final_loss - b.runs[k].final_loss;
            }
            PairComparison pc;
            pc.first = a.name;
            pc.second = b.name;
            pc.final_loss = sign_test(la, lb);
            pc.avg_grad_norm_sq = sign_test(ga, gb);
            pc.mean_loss_difference = a.runs.empty() ? 0.0 : diff / static_cast<double>(a.runs.size());
            pairs.push_back({{"first", pc.first},
                             {"second", pc.second},
                             {"mean_final_loss_difference", pc.mean_loss_difference},
                             {"final_loss_sign_test", sign_test_json(pc.final_loss)},
                             {"avg_grad_norm_sq_sign_test", sign_test_json(pc.avg_grad_norm_sq)}});
            report.pairs.push_back(pc);
        }
    }
    report.summary = {
        {"name", config.name},
        {"config_hash", config.hash},
        {"artifact_version", kArtifactVersion},
        {"seeds", config.seeds},
        {"arms", arms},
        {"pairs", pairs},
    };
    return report;
}

ComparisonReport run_comparison(const ExperimentConfig& config, std::span<const SchedulerKind> schedulers) {
    const auto task = build_task(config.task);
    auto report = compare_schedulers(config, *task, schedulers);
    const fs::path dir = output_directory(config);
    fs::create_directories(dir);
    std::vector<PlotGroup> groups;
    for (const auto& arm : report.arms) {
        write_arm_traces(config, arm, dir);
        PlotGroup g{arm.name, {}};
        for (const auto& run : arm.runs) g.traces.push_back(run.result.records);
        groups.push_back(std::move(g));
    }
    write_json(dir / "comparison.json", report.summary);
    for (PlotMetric m : {PlotMetric::Loss, PlotMetric::GradNormSq}) {
        std::ofstream out(dir / ("plot_" + to_string(m) + ".tsv"));
        emit_plot_data(out, groups, m, 10);
    }
    return report;
}

PlotMetric parse_plot_metric(const std::string& name) {
    if (name == "loss") return PlotMetric::Loss;
    if (name == "grad_norm_sq") return PlotMetric::GradNormSq;
    if (name == "n_t") return PlotMetric::Participants;
    if (name == "eta_t") return PlotMetric::Stepsize;
    throw ConfigError("metric", "expected loss, grad_norm_sq, n_t or eta_t");
}

std::string to_string(PlotMetric metric) {
    switch (metric) {
        case PlotMetric::Loss: return "loss";
        case PlotMetric::GradNormSq: return "grad_norm_sq";
        case PlotMetric::Participants: return "n_t";
        case PlotMetric::Stepsize: return "eta_t";
    }
    return "";
}

void emit_plot_data(std::ostream& out, std::span<const PlotGroup> groups, PlotMetric metric, std::size_t window) {
    if (window == 0) throw InvalidArgument("smoothing window must be positive");
    std::optional<std::size_t> rounds;
    for (const auto& g : groups) {
        if (g.traces.empty()) throw ShapeMismatch("group '" + g.name + "' has no traces");
        for (const auto& t : g.traces) {
            if (rounds && *rounds != t.size()) throw ShapeMismatch("traces have different lengths");
            rounds = t.size();
        }
    }
    if (!rounds) throw ShapeMismatch("no traces to plot");

    // smoothed[g][trace][t]
    std::vector<std::vector<std::vector<double>>> smoothed;
    for (const auto& g : groups) {
        auto& sg = smoothed.emplace_back();
        for (const auto& trace : g.traces) {
            auto& st = sg.emplace_back(trace.size());
            for (std::size_t t = 0; t < trace.size(); ++t) {
                const std::size_t from = t + 1 >= window ? t + 1 - window : 0;
                double acc = 0.0;
                for (std::size_t u = from; u <= t; ++u) acc += metric_value(trace[u], metric);
                st[t] = acc / static_cast<double>(t + 1 - from);
            }
        }
    }

    char buf[40];
    out << "round";
    for (const auto& g : groups) out << '\t' << g.name << "_mean\t" << g.name << "_std";
    out << '\n';
    for (std::size_t t = 0; t < *rounds; ++t) {
        out << t;
        for (const auto& sg : smoothed) {
            std::vector<double> column;
            for (const auto& st : sg) column.push_back(st[t]);
            std::snprintf(buf, sizeof buf, "%.10g", mean(column));
            out << '\t' << buf;
            std::snprintf(buf, sizeof buf, "%.10g", stddev(column));
            out << '\t' << buf;
        }
        out << '\n';
    }
}

}  // namespace ehfl

// Command-line front end for the energy-harvesting federated learning simulator.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error,
// 3 bound check failed (only with bounds.assert / --assert).

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ehfl/bounds.hpp"
#include "ehfl/config.hpp"
#include "ehfl/errors.hpp"
#include "ehfl/experiment.hpp"
#include "ehfl/trace.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kBoundFailure = 3;

struct ConfigSource {
    std::string file;
    std::string preset;
    std::map<std::string, std::string> flags;
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
    cmd->add_option("--config", src.file, "INI-style config file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", src.preset, "start from a named preset");
    for (const auto& key : ehfl::config_schema())
        cmd->add_option("--" + key.key, src.flags[key.key], key.help + " [default: " + key.default_value + "]");
}

ehfl::ExperimentConfig resolve(const ConfigSource& src, CLI::App* cmd) {
    ehfl::ConfigValues values;
    if (!src.preset.empty()) values = ehfl::find_preset(src.preset).values;
    if (!src.file.empty()) values = ehfl::merge_config(values, ehfl::load_config_file(src.file));
    ehfl::ConfigValues overrides;
    for (const auto& [k, v] : src.flags)
        if (cmd->count("--" + k)) overrides[k] = v;
    return ehfl::build_experiment_config(ehfl::merge_config(values, overrides));
}

struct BoundArgs {
    std::string theorem = "thm1";
    ehfl::BoundParams p;
};

void add_bound_options(CLI::App* cmd, BoundArgs& a, bool with_counts) {
    cmd->add_option("--theorem", a.theorem, "thm1 (parallel SGD) or thm2 (local SGD)")
        ->check(CLI::IsMember({"thm1", "thm2"}));
    cmd->add_option("--L", a.p.L, "smoothness constant")->required();
    cmd->add_option("--sigma-sq", a.p.sigma_sq, "gradient variance bound")->required();
    cmd->add_option("--f0-gap", a.p.f0_gap, "f(x0) - f*")->required();
    cmd->add_option("--K", a.p.K, "local steps");
    cmd->add_option("--eta", a.p.eta, "base stepsize")->required();
    if (with_counts) {
        cmd->add_option("--n-min", a.p.n_min, "smallest n_t")->required();
        cmd->add_option("--n-max", a.p.n_max, "largest n_t")->required();
        cmd->add_option("--T", a.p.T, "number of rounds")->required();
    }
}

ehfl::BoundKind bound_kind(const std::string& s) {
    return s == "thm1" ? ehfl::BoundKind::Theorem1 : ehfl::BoundKind::Theorem2;
}

void print_warnings(const ehfl::ArmResult& arm) {
    // Every seed tends to raise the same warning; report the first and a count.
    std::size_t count = 0;
    const std::string* first = nullptr;
    std::uint64_t first_seed = 0;
    for (const auto& run : arm.runs) {
        for (const auto& w : run.result.warnings) {
            if (!first) {
                first = &w;
                first_seed = run.seed;
            }
            ++count;
        }
    }
    if (!first) return;
    std::cerr << "warning [" << arm.name << " seed " << first_seed << "]: " << *first << "\n";
    if (count > 1) std::cerr << "warning [" << arm.name << "]: " << count - 1 << " more suppressed\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting federated learning simulator"};
    app.require_subcommand(1);

    ConfigSource run_src, cmp_src;
    auto* run = app.add_subcommand("run", "run one scheduler over every configured seed");
    add_config_options(run, run_src);

    std::string schedulers;
    auto* cmp = app.add_subcommand("compare", "paired-seed comparison of several schedulers");
    add_config_options(cmp, cmp_src);
    cmp->add_option("--schedulers", schedulers, "comma-separated list (overrides compare.schedulers)");

    auto* bounds = app.add_subcommand("bounds", "convergence bound utilities");
    bounds->require_subcommand(1);
    BoundArgs eval_args, check_args;
    auto* eval = bounds->add_subcommand("eval", "evaluate a bound for given constants");
    add_bound_options(eval, eval_args, true);
    auto* check = bounds->add_subcommand("check-trace", "compare traces with a bound");
    add_bound_options(check, check_args, false);
    std::vector<std::string> check_files;
    bool check_assert = false;
    check->add_option("traces", check_files, "trace CSV files (one per seed)")->required()->check(CLI::ExistingFile);
    check->add_flag("--assert", check_assert, "exit with code 3 if the bound is violated");

    auto* plot = app.add_subcommand("plot-data", "mean/std curves across traces, grouped by scheduler");
    std::string metric = "loss", plot_out;
    std::size_t window = 1;
    std::vector<std::string> plot_files;
    plot->add_option("--metric", metric, "loss, grad_norm_sq, n_t or eta_t");
    plot->add_option("--window", window, "trailing smoothing window")->check(CLI::PositiveNumber);
    plot->add_option("--out", plot_out, "output file (default stdout)");
    plot->add_option("traces", plot_files, "trace CSV files")->required()->check(CLI::ExistingFile);

    auto* pre = app.add_subcommand("presets", "preset configurations");
    pre->require_subcommand(1);
    auto* pre_list = pre->add_subcommand("list", "list presets");
    std::string show_name;
    auto* pre_show = pre->add_subcommand("show", "print a preset as a config file");
    pre_show->add_option("name", show_name)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = resolve(run_src, run);
            const auto outcome = ehfl::run_experiment(cfg);
            print_warnings(outcome.arm);
            std::cout << outcome.summary.dump(2) << "\n";
            std::cerr << "wrote " << outcome.directory << "\n";
            if (cfg.bound_assert && outcome.bound_failed) return kBoundFailure;
        } else if (*cmp) {
            auto values_cfg = resolve(cmp_src, cmp);
            if (!schedulers.empty()) {
                auto values = values_cfg.values;
                values["compare.schedulers"] = schedulers;
                values_cfg = ehfl::build_experiment_config(values);
            }
            const auto report = ehfl::run_comparison(values_cfg, values_cfg.compare_schedulers);
            for (const auto& arm : report.arms) print_warnings(arm);
            std::cout << report.summary.dump(2) << "\n";
            std::cerr << "wrote " << ehfl::output_directory(values_cfg) << "\n";
        } else if (*eval) {
            const auto report = ehfl::evaluate_bound(bound_kind(eval_args.theorem), eval_args.p);
            std::cout << ehfl::bound_report_json(report).dump(2) << "\n";
        } else if (*check) {
            std::vector<std::vector<ehfl::RoundRecord>> traces;
            for (const auto& f : check_files) traces.push_back(ehfl::read_trace_file(f).records);
            const auto report = ehfl::check_trace_against_bound(traces, check_args.p, bound_kind(check_args.theorem));
            std::cout << ehfl::bound_report_json(report).dump(2) << "\n";
            if (check_assert && !report.satisfied.value_or(false)) return kBoundFailure;
        } else if (*plot) {
            std::vector<ehfl::PlotGroup> groups;
            for (const auto& f : plot_files) {
                auto trace = ehfl::read_trace_file(f);
                auto it = std::find_if(groups.begin(), groups.end(),
                                       [&](const auto& g) { return g.name == trace.header.scheduler; });
                if (it == groups.end()) it = groups.insert(groups.end(), ehfl::PlotGroup{trace.header.scheduler, {}});
                it->traces.push_back(std::move(trace.records));
            }
            const auto m = ehfl::parse_plot_metric(metric);
            if (plot_out.empty()) {
                ehfl::emit_plot_data(std::cout, groups, m, window);
            } else {
                std::ofstream out(plot_out);
                if (!out) throw ehfl::Error("cannot write '" + plot_out + "'");
                ehfl::emit_plot_data(out, groups, m, window);
            }
        } else if (*pre_list) {
            for (const auto& p : ehfl::presets()) std::cout << p.name << "\t" << p.description << "\n";
        } else if (*pre_show) {
            std::cout << ehfl::format_config(ehfl::with_defaults(ehfl::find_preset(show_name).values));
        }
    } catch (const ehfl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ehfl::EmptyRound& e) {
        std::cerr << "bound check not applicable: " << e.what() << "\n";
        return check_assert ? kBoundFailure : kRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}

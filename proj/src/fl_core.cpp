#include "ehfl/fl_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

void require_finite(const ModelVector& x, const char* where) {
    if (!x.allFinite()) throw NonFiniteModel(std::string("non-finite model entry in ") + where);
}

}  // namespace

double experiment_base_rate(const ExperimentRule& rule, std::size_t t) {
    if (rule.decay_period == 0) throw InvalidStepsize("decay period must be positive");
    return rule.eta0 * std::pow(rule.decay_rate, static_cast<double>(t / rule.decay_period));
}

double compute_stepsize(const StepsizePolicy& policy, std::size_t t, std::size_t n_t) {
    if (n_t == 0) throw InvalidStepsize("stepsize requested for a round without participants");
    const double n = static_cast<double>(n_t);
    double eta = 0.0;
    if (const auto* thm = std::get_if<TheoremRule>(&policy)) {
        if (thm->horizon == 0) throw InvalidStepsize("theorem rule horizon must be positive");
        eta = thm->eta * std::sqrt(n / static_cast<double>(thm->horizon));
    } else {
        const auto& exp = std::get<ExperimentRule>(policy);
        eta = experiment_base_rate(exp, t) * exp.c * std::sqrt(n);
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidStepsize("stepsize must be positive and finite");
    return eta;
}

std::vector<double> window_scales(std::span<const std::size_t> n_sequence, std::size_t window, double fallback) {
    if (window == 0) throw InvalidStepsize("modulation window must be positive");
    std::vector<double> scales;
    for (std::size_t start = 0; start < n_sequence.size(); start += window) {
        const std::size_t end = std::min(n_sequence.size(), start + window);
        double sum = 0.0;
        std::size_t active = 0;
        for (std::size_t t = start; t < end; ++t) {
            if (n_sequence[t] == 0) continue;
            sum += std::sqrt(static_cast<double>(n_sequence[t]));
            ++active;
        }
        scales.push_back(active ? static_cast<double>(active) / sum : fallback);
    }
    return scales;
}

double max_feasible_eta(SgdMode mode, double L, std::size_t K, std::size_t n_max, std::size_t T) {
    if (!(L > 0.0) || K == 0 || n_max == 0 || T == 0)
        throw InvalidArgument("feasibility needs L > 0, K >= 1, n_max >= 1, T >= 1");
    if (mode == SgdMode::Parallel) return std::sqrt(static_cast<double>(T) / static_cast<double>(n_max)) / L;
    return std::sqrt(1.0 / (30.0 * static_cast<double>(n_max))) / (2.0 * static_cast<double>(K) * L);
}

FeasibilityCheck validate_stepsize(double eta, SgdMode mode, double L, std::size_t K, std::size_t n_max,
                                   std::size_t T) {
    FeasibilityCheck out;
    out.max_eta = max_feasible_eta(mode, L, K, n_max, T);
    out.ok = eta > 0.0 && eta <= out.max_eta;
    return out;
}

LocalRoundResult local_sgd_round(const Task& task, const ModelVector& x_t, std::span<const ClientId> participants,
                                 double eta_t, const LocalRoundOptions& options, std::span<Engine> client_streams) {
    if (participants.empty()) throw EmptyCohort("local SGD round with no participants");
    if (options.local_steps == 0) throw InvalidArgument("local steps must be at least one");
    if (!(eta_t > 0.0) || !std::isfinite(eta_t)) throw InvalidStepsize("stepsize must be positive and finite");
    if (static_cast<std::size_t>(x_t.size()) != task.dimension()) throw ShapeMismatch("model dimension mismatch");

    std::vector<ClientId> order(participants.begin(), participants.end());
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end())
        throw InvalidArgument("participant listed twice");
    if (order.back() >= client_streams.size() || order.back() >= task.num_clients())
        throw ShapeMismatch("participant id out of range");

    LocalRoundResult out;
    if (options.keep_iterates) out.iterates.resize(order.size());

    ModelVector sum = ModelVector::Zero(x_t.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const ClientId i = order[k];
        ModelVector x = x_t;
        for (std::size_t tau = 0; tau < options.local_steps; ++tau) {
            if (options.keep_iterates) out.iterates[k].push_back(x);
            x -= eta_t * stochastic_gradient(task, x, i, options.batch_size, client_streams[i]);
            require_finite(x, "local iterate");
        }
        sum += x;
    }
    out.model = sum / static_cast<double>(order.size());
    require_finite(out.model, "aggregate");

    out.record.n_t = order.size();
    out.record.eta_t = eta_t;
    const auto [f, g] = task.loss_and_gradient(x_t);
    out.record.loss = f;
    out.record.grad_norm_sq = g.squaredNorm();
    if (options.keep_iterates) out.record.drift = measure_drift(out.iterates, x_t);
    return out;
}

double measure_drift(const ClientIterates& iterates, const ModelVector& x_t) {
    if (iterates.empty()) return 0.0;
    std::size_t steps = iterates.front().size();
    for (const auto& chain : iterates) steps = std::min(steps, chain.size());
    double worst = 0.0;
    for (std::size_t tau = 0; tau < steps; ++tau) {
        double acc = 0.0;
        for (const auto& chain : iterates) acc += (x_t - chain[tau]).squaredNorm();
        worst = std::max(worst, acc / static_cast<double>(iterates.size()));
    }
    return worst;
}

double drift_bound(std::size_t K, double sigma_sq, double eta_t, double grad_norm_sq) {
    const double k = static_cast<double>(K);
    const double e2 = eta_t * eta_t;
    return 5.0 * k * sigma_sq * e2 + 30.0 * k * k * e2 * grad_norm_sq;
}

TrainingResult run_training(const Task& task, const TrainingConfig& config) {
    config.energy.validate();
    const std::size_t m = config.energy.num_clients;
    validate_scheduler(config.scheduler, m);
    if (task.num_clients() != m) throw ConfigError("energy.clients", "does not match the task's client partition");
    if (config.local_steps == 0) throw ConfigError("experiment.local_steps", "must be at least one");
    for (ClientId i = 0; i < m; ++i)
        if (config.batch_size == 0 || config.batch_size > task.client_indices(i).size())
            throw ConfigError("experiment.batch_size", "must be between 1 and the client partition size");

    TrainingResult result;
    ModelVector x = config.initial_model.size() ? config.initial_model : ModelVector::Zero(task.dimension());
    if (static_cast<std::size_t>(x.size()) != task.dimension())
        throw ConfigError("experiment.initial_model", "dimension does not match the task");
    require_finite(x, "initial model");

    // Energy and scheduling never look at the model, so the participation
    // trajectory is simulated first. This lets the experiment stepsize rule
    // normalize each window with its realized client counts.
    std::vector<ScheduleDecision> decisions;
    std::vector<std::vector<int>> snapshots;
    decisions.reserve(config.rounds);
    snapshots.reserve(config.rounds);
    {
        EnergyState state(config.energy);
        auto arrival_streams = make_client_streams(config.seed, StreamDomain::Arrivals, m);
        const std::vector<ClientId> none;
        for (std::size_t t = 0; t < config.rounds; ++t) {
            snapshots.emplace_back(state.levels().begin(), state.levels().end());
            decisions.push_back(schedule(config.scheduler, t, state));
            const ArrivalSample arrivals = sample_arrivals(config.energy, arrival_streams);
            const auto& d = decisions.back();
            state = update_energy(state, d.non_causal ? std::span<const ClientId>(none)
                                                      : std::span<const ClientId>(d.participants),
                                  arrivals, config.energy);
        }
    }

    std::vector<std::size_t> n_seq(config.rounds);
    std::size_t n_max = 0;
    for (std::size_t t = 0; t < config.rounds; ++t) {
        n_seq[t] = decisions[t].n();
        n_max = std::max(n_max, n_seq[t]);
    }

    const SgdMode mode = config.local_steps > 1 ? SgdMode::Local : SgdMode::Parallel;
    std::vector<double> scales;
    if (const auto* thm = std::get_if<TheoremRule>(&config.stepsize)) {
        if (thm->horizon != config.rounds && config.rounds > 0) {
            std::ostringstream msg;
            msg << "theorem rule horizon " << thm->horizon << " differs from the number of rounds " << config.rounds;
            result.warnings.push_back(msg.str());
        }
        if (n_max > 0) {
            const auto check =
                validate_stepsize(thm->eta, mode, task.smoothness(), config.local_steps, n_max, thm->horizon);
            if (!check.ok) {
                std::ostringstream msg;
                msg << "base stepsize " << thm->eta << " exceeds the admissible maximum " << check.max_eta;
                if (config.strict_feasibility) throw FeasibilityViolation(msg.str(), check.max_eta);
                result.warnings.push_back(msg.str());
            }
        }
    } else {
        const auto& rule = std::get<ExperimentRule>(config.stepsize);
        scales = window_scales(n_seq, rule.window, rule.c);
    }

    auto sgd_streams = make_client_streams(config.seed, StreamDomain::Minibatch, m);
    LocalRoundOptions options{config.local_steps, config.batch_size, config.track_drift};
    double worst_implied_eta = 0.0;

    result.records.reserve(config.rounds);
    for (std::size_t t = 0; t < config.rounds; ++t) {
        const auto& decision = decisions[t];
        RoundRecord rec;
        if (decision.n() == 0) {
            const auto [f, g] = task.loss_and_gradient(x);
            rec.loss = f;
            rec.grad_norm_sq = g.squaredNorm();
        } else {
            double eta_t = 0.0;
            if (const auto* exp = std::get_if<ExperimentRule>(&config.stepsize)) {
                ExperimentRule windowed = *exp;
                windowed.c = scales[t / exp->window];
                eta_t = compute_stepsize(windowed, t, decision.n());
                worst_implied_eta = std::max(
                    worst_implied_eta,
                    eta_t * std::sqrt(static_cast<double>(config.rounds) / static_cast<double>(decision.n())));
            } else {
                eta_t = compute_stepsize(config.stepsize, t, decision.n());
            }
            auto round = local_sgd_round(task, x, decision.participants, eta_t, options, sgd_streams);
            x = std::move(round.model);
            rec = std::move(round.record);
        }
        rec.t = t;
        rec.n_t = decision.n();
        rec.energy = std::move(snapshots[t]);
        rec.non_causal = decision.non_causal;
        result.records.push_back(std::move(rec));
    }

    if (std::holds_alternative<ExperimentRule>(config.stepsize) && n_max > 0) {
        const auto check =
            validate_stepsize(worst_implied_eta, mode, task.smoothness(), config.local_steps, n_max, config.rounds);
        if (!check.ok) {
            std::ostringstream msg;
            msg << "experiment stepsizes imply a base stepsize of " << worst_implied_eta
                << ", above the theorem maximum " << check.max_eta << " (not clamped)";
            result.warnings.push_back(msg.str());
        }
    }
    result.final_model = std::move(x);
    return result;
}

}  // namespace ehfl

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ehfl/energy.hpp"
#include "ehfl/scheduler.hpp"
#include "ehfl/tasks.hpp"

namespace ehfl {

using ModelVector = Vector;

/// eta_t = eta * sqrt(n_t / T)
struct TheoremRule {
    double eta;
    std::size_t horizon;
};

/// eta_t = eta0 * decay_rate^floor(t / decay_period) * c * sqrt(n_t).
/// `c` is the modulation constant of the window containing t; run_training sets it
/// per window so that the window mean of c * sqrt(n_t) is exactly one.
struct ExperimentRule {
    double eta0 = 0.15;
    std::size_t decay_period = 10;
    double decay_rate = 0.99;
    double c = 1.0;
    std::size_t window = 10;
};

using StepsizePolicy = std::variant<TheoremRule, ExperimentRule>;

enum class SgdMode { Parallel, Local };

double experiment_base_rate(const ExperimentRule& rule, std::size_t t);

/// Throws InvalidStepsize when n_t == 0 or the result is not a positive finite number.
double compute_stepsize(const StepsizePolicy& policy, std::size_t t, std::size_t n_t);

/// c_w = 1 / mean_{t in w, n_t > 0} sqrt(n_t) for each window w of `window` rounds.
/// Windows without participants get `fallback`.
std::vector<double> window_scales(std::span<const std::size_t> n_sequence, std::size_t window, double fallback);

/// Largest admissible base stepsize: (1/L) sqrt(T / n_max) for parallel SGD,
/// (1/(2KL)) sqrt(1 / (30 n_max)) for local SGD.
double max_feasible_eta(SgdMode mode, double L, std::size_t K, std::size_t n_max, std::size_t T);

struct FeasibilityCheck {
    bool ok = false;
    double max_eta = 0.0;
};

FeasibilityCheck validate_stepsize(double eta, SgdMode mode, double L, std::size_t K, std::size_t n_max,
                                   std::size_t T);

struct RoundRecord {
    std::size_t t = 0;
    std::size_t n_t = 0;
    double eta_t = 0.0;         // 0 when nobody participated
    double loss = 0.0;          // f(x_t), before the round's update
    double grad_norm_sq = 0.0;  // ||grad f(x_t)||^2
    std::vector<int> energy;    // E_i(t) at the start of the round
    std::optional<double> drift;
    bool non_causal = false;
};

/// iterates[i][tau] is client i's model after tau local steps, tau = 0..K-1.
using ClientIterates = std::vector<std::vector<ModelVector>>;

struct LocalRoundResult {
    ModelVector model;
    RoundRecord record;  // n_t, eta_t, loss, grad_norm_sq and drift; caller fills t and energy
    ClientIterates iterates;  // empty unless requested
};

struct LocalRoundOptions {
    std::size_t local_steps = 1;
    std::size_t batch_size = 1;
    bool keep_iterates = false;
};

/// One round of local SGD: every participant starts from x_t, takes K mini-batch
/// steps with stepsize eta_t, and the server averages the K-step models uniformly.
/// `client_streams` is indexed by client id.
LocalRoundResult local_sgd_round(const Task& task, const ModelVector& x_t, std::span<const ClientId> participants,
                                 double eta_t, const LocalRoundOptions& options, std::span<Engine> client_streams);

/// max over tau of (1/n_t) sum_i ||x_t - x_{t,tau}^i||^2.
double measure_drift(const ClientIterates& iterates, const ModelVector& x_t);

/// Right-hand side of the client-drift inequality: 5 K sigma^2 eta^2 + 30 K^2 eta^2 ||grad f(x_t)||^2.
double drift_bound(std::size_t K, double sigma_sq, double eta_t, double grad_norm_sq);

struct TrainingConfig {
    EnergyConfig energy;
    SchedulerKind scheduler = Greedy{};
    std::size_t local_steps = 1;
    StepsizePolicy stepsize = TheoremRule{0.1, 1};
    std::size_t rounds = 0;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1;
    bool track_drift = false;
    /// Fail instead of warn when a TheoremRule base stepsize is infeasible.
    bool strict_feasibility = false;
    /// Starting model; zeros when empty.
    ModelVector initial_model;
};

struct TrainingResult {
    std::vector<RoundRecord> records;
    ModelVector final_model;
    std::vector<std::string> warnings;
};

/// T rounds of schedule -> local SGD (skipped when N_t is empty) -> energy update.
/// Arrival and mini-batch streams are keyed by (seed, client), so arrivals are
/// identical across schedulers for the same seed.
TrainingResult run_training(const Task& task, const TrainingConfig& config);

}  // namespace ehfl

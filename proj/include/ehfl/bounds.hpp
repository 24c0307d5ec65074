#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehfl/fl_core.hpp"

namespace ehfl {

/// Constants entering the convergence bounds for the realized client counts.
struct BoundParams {
    double L = 1.0;
    double sigma_sq = 0.0;
    double f0_gap = 0.0;  // f(x_0) - f*
    std::size_t n_min = 1;
    std::size_t n_max = 1;
    std::size_t K = 1;
    std::size_t T = 1;
    double eta = 0.0;
};

enum class BoundKind { Theorem1, Theorem2 };

struct BoundTerm {
    std::string name;
    double value;
};

struct BoundReport {
    BoundKind kind = BoundKind::Theorem1;
    double bound_value = 0.0;
    std::vector<BoundTerm> terms;
    bool feasible = false;
    double max_eta = 0.0;
    BoundParams params;
    std::optional<double> measured_avg_grad_sq;    // mean over seeds
    std::optional<double> measured_worst_grad_sq;  // worst single seed
    std::optional<bool> satisfied;
    std::size_t seeds = 0;
};

/// Parallel SGD (K = 1):
///   (f0 - f*) / (eta sqrt(n_min T) - (L/2) eta^2 n_min)
///   + L sigma^2 / (2 eta sqrt(n_min T) - L eta^2 n_min)
/// Throws InfeasibleEta unless 0 < eta <= (1/L) sqrt(T / n_max).
BoundReport theorem1_bound(const BoundParams& p);

/// Local SGD:
///   ((2/K)(f0 - f*) + L sigma^2 eta^2) / (eta sqrt(n_min T) - sqrt(30) K L eta^2 n_min)
///   + 5 K L^2 sigma^2 eta^3 n_max^{3/2} / (eta sqrt(n_min T) - sqrt(30) K L eta^2 n_min sqrt(T))
/// Throws InfeasibleEta unless 0 < eta <= (1/(2KL)) sqrt(1 / (30 n_max)).
BoundReport theorem2_bound(const BoundParams& p);

BoundReport evaluate_bound(BoundKind kind, const BoundParams& p);

/// sqrt(max n_t / min n_t). Throws EmptyRound if any n_t is zero.
double uniformity_ratio(std::span<const std::size_t> n_sequence);

/// Average of (1/T) sum_t ||grad f(x_t)||^2 over the supplied per-seed traces,
/// compared with the bound evaluated at the traces' realized n_min and n_max.
/// Throws EmptyRound if any trace contains a round without participants.
BoundReport check_trace_against_bound(std::span<const std::vector<RoundRecord>> traces, BoundParams p,
                                      BoundKind kind);

std::string to_string(BoundKind kind);

}  // namespace ehfl

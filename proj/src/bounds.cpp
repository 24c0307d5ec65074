#include "ehfl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

using Real = long double;

void check_params(const BoundParams& p) {
    if (!(p.L > 0.0)) throw InvalidArgument("L must be positive");
    if (!(p.sigma_sq >= 0.0)) throw InvalidArgument("sigma^2 must be non-negative");
    if (!(p.f0_gap >= 0.0)) throw InvalidArgument("f(x0) - f* must be non-negative");
    if (p.n_min == 0 || p.n_min > p.n_max) throw InvalidArgument("need 0 < n_min <= n_max");
    if (p.K == 0 || p.T == 0) throw InvalidArgument("K and T must be positive");
}

// Terms are accumulated smallest first in extended precision and rounded once.
void fill_terms(BoundReport& out, std::vector<std::pair<const char*, Real>> terms) {
    for (const auto& [name, value] : terms) out.terms.push_back({name, static_cast<double>(value)});
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    Real total = 0;
    for (const auto& t : terms) total += t.second;
    out.bound_value = static_cast<double>(total);
}

Real positive_denominator(Real value, const char* name) {
    if (!(value > 0)) throw DegenerateDenominator(std::string(name) + " is not positive");
    return value;
}

}  // namespace

std::string to_string(BoundKind kind) { return kind == BoundKind::Theorem1 ? "thm1" : "thm2"; }

BoundReport theorem1_bound(const BoundParams& p) {
    check_params(p);
    if (p.K != 1) throw InvalidArgument("the parallel SGD bound requires K = 1");
    BoundReport out;
    out.kind = BoundKind::Theorem1;
    out.params = p;
    out.max_eta = max_feasible_eta(SgdMode::Parallel, p.L, 1, p.n_max, p.T);
    out.feasible = p.eta > 0.0 && p.eta <= out.max_eta;
    if (!out.feasible) throw InfeasibleEta("eta outside (0, (1/L) sqrt(T / n_max)]");

    const Real L = p.L, eta = p.eta, nmin = static_cast<Real>(p.n_min), T = static_cast<Real>(p.T);
    const Real root = std::sqrt(nmin * T);
    const Real d1 = positive_denominator(eta * root - L / 2 * eta * eta * nmin, "optimization denominator");
    const Real d2 = positive_denominator(2 * eta * root - L * eta * eta * nmin, "noise denominator");
    fill_terms(out, {{"optimization", static_cast<Real>(p.f0_gap) / d1},
                     {"noise", L * static_cast<Real>(p.sigma_sq) / d2}});
    return out;
}

BoundReport theorem2_bound(const BoundParams& p) {
    check_params(p);
    BoundReport out;
    out.kind = BoundKind::Theorem2;
    out.params = p;
    out.max_eta = max_feasible_eta(SgdMode::Local, p.L, p.K, p.n_max, p.T);
    out.feasible = p.eta > 0.0 && p.eta <= out.max_eta;
    if (!out.feasible) throw InfeasibleEta("eta outside (0, (1/(2KL)) sqrt(1 / (30 n_max))]");

    const Real L = p.L, eta = p.eta, s2 = p.sigma_sq, K = static_cast<Real>(p.K);
    const Real nmin = static_cast<Real>(p.n_min), nmax = static_cast<Real>(p.n_max), T = static_cast<Real>(p.T);
    const Real sqrt30 = std::sqrt(Real{30});
    const Real lead = eta * std::sqrt(nmin * T);
    const Real drift = sqrt30 * K * L * eta * eta * nmin;
    const Real d1 = positive_denominator(lead - drift, "first denominator");
    const Real d2 = positive_denominator(lead - drift * std::sqrt(T), "second denominator");
    fill_terms(out, {{"optimization", 2 / K * static_cast<Real>(p.f0_gap) / d1},
                     {"noise", L * s2 * eta * eta / d1},
                     {"drift", 5 * K * L * L * s2 * eta * eta * eta * nmax * std::sqrt(nmax) / d2}});
    return out;
}

BoundReport evaluate_bound(BoundKind kind, const BoundParams& p) {
    return kind == BoundKind::Theorem1 ? theorem1_bound(p) : theorem2_bound(p);
}

double uniformity_ratio(std::span<const std::size_t> n_sequence) {
    if (n_sequence.empty()) throw EmptyRound("empty participation sequence");
    const auto [lo, hi] = std::minmax_element(n_sequence.begin(), n_sequence.end());
    if (*lo == 0) throw EmptyRound("sequence contains a round without participants");
    return std::sqrt(static_cast<double>(*hi) / static_cast<double>(*lo));
}

BoundReport check_trace_against_bound(std::span<const std::vector<RoundRecord>> traces, BoundParams p,
                                      BoundKind kind) {
    if (traces.empty()) throw InvalidArgument("no traces supplied");
    std::size_t n_min = std::numeric_limits<std::size_t>::max(), n_max = 0;
    std::vector<double> per_seed;
    for (const auto& trace : traces) {
        if (trace.empty()) throw InvalidArgument("empty trace");
        double acc = 0.0;
        for (const auto& rec : trace) {
            if (rec.n_t == 0) throw EmptyRound("round " + std::to_string(rec.t) + " has no participants");
            n_min = std::min(n_min, rec.n_t);
            n_max = std::max(n_max, rec.n_t);
            acc += rec.grad_norm_sq;
        }
        per_seed.push_back(acc / static_cast<double>(trace.size()));
        if (trace.size() != traces.front().size()) throw ShapeMismatch("traces differ in length");
    }
    p.n_min = n_min;
    p.n_max = n_max;
    p.T = traces.front().size();
    if (kind == BoundKind::Theorem1 && p.K != 1) throw InvalidArgument("thm1 check requires K = 1");

    BoundReport out = evaluate_bound(kind, p);
    out.seeds = per_seed.size();
    out.measured_avg_grad_sq = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) /
                               static_cast<double>(per_seed.size());
    out.measured_worst_grad_sq = *std::max_element(per_seed.begin(), per_seed.end());
    out.satisfied = *out.measured_avg_grad_sq <= out.bound_value;
    return out;
}

}  // namespace ehfl

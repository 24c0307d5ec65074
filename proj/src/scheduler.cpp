#include "ehfl/scheduler.hpp"

#include <algorithm>
#include <numeric>

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::vector<ClientId> causal_filter(const std::vector<ClientId>& candidates, const EnergyState& state) {
    std::vector<ClientId> out;
    for (ClientId i : candidates)
        if (state.level(i) >= 1) out.push_back(i);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ClientId> rotation(std::size_t round, std::size_t width, std::size_t m) {
    std::vector<ClientId> ids(width);
    const std::size_t start = (round % m) * (width % m) % m;
    for (std::size_t j = 0; j < width; ++j) ids[j] = (start + j) % m;
    return ids;
}

void check_width(std::size_t width, std::size_t m, const char* field) {
    if (width == 0 || width > m) throw ConfigError(field, "must be between 1 and the number of clients");
}

}  // namespace

std::string scheduler_name(const SchedulerKind& kind) {
    return std::visit(overloaded{
                          [](const Myopic&) { return std::string("myopic"); },
                          [](const RoundRobin&) { return std::string("round_robin"); },
                          [](const Greedy&) { return std::string("greedy"); },
                          [](const OracleUniform&) { return std::string("oracle"); },
                      },
                      kind);
}

void validate_scheduler(const SchedulerKind& kind, std::size_t num_clients) {
    std::visit(overloaded{
                   [&](const Myopic& k) { check_width(k.lambda_total, num_clients, "scheduler.lambda_total"); },
                   [&](const RoundRobin& k) { check_width(k.lambda_total, num_clients, "scheduler.lambda_total"); },
                   [](const Greedy&) {},
                   [&](const OracleUniform& k) { check_width(k.n, num_clients, "scheduler.oracle_n"); },
               },
               kind);
}

ScheduleDecision myopic_schedule(const EnergyState& state, std::size_t lambda_total) {
    const std::size_t m = state.num_clients();
    check_width(lambda_total, m, "scheduler.lambda_total");
    std::vector<ClientId> order(m);
    std::iota(order.begin(), order.end(), ClientId{0});
    // Longest queue first; lowest id wins ties.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lambda_total), order.end(),
                      [&](ClientId a, ClientId b) {
                          const int ea = state.level(a), eb = state.level(b);
                          return ea != eb ? ea > eb : a < b;
                      });
    order.resize(lambda_total);
    ScheduleDecision d;
    d.participants = causal_filter(order, state);
    d.candidates = std::move(order);
    return d;
}

ScheduleDecision round_robin_schedule(std::size_t round, std::size_t lambda_total, const EnergyState& state) {
    const std::size_t m = state.num_clients();
    check_width(lambda_total, m, "scheduler.lambda_total");
    ScheduleDecision d;
    d.candidates = rotation(round, lambda_total, m);
    d.participants = causal_filter(d.candidates, state);
    return d;
}

ScheduleDecision greedy_schedule(const EnergyState& state) {
    ScheduleDecision d;
    d.participants = available_clients(state);
    d.candidates = d.participants;
    return d;
}

ScheduleDecision oracle_uniform_schedule(std::size_t round, std::size_t n, const EnergyState& state) {
    const std::size_t m = state.num_clients();
    check_width(n, m, "scheduler.oracle_n");
    ScheduleDecision d;
    d.candidates = rotation(round, n, m);
    d.participants = d.candidates;
    std::sort(d.participants.begin(), d.participants.end());
    d.non_causal = true;
    return d;
}

ScheduleDecision schedule(const SchedulerKind& kind, std::size_t round, const EnergyState& state) {
    return std::visit(overloaded{
                          [&](const Myopic& k) { return myopic_schedule(state, k.lambda_total); },
                          [&](const RoundRobin& k) { return round_robin_schedule(round, k.lambda_total, state); },
                          [&](const Greedy&) { return greedy_schedule(state); },
                          [&](const OracleUniform& k) { return oracle_uniform_schedule(round, k.n, state); },
                      },
                      kind);
}

}  // namespace ehfl

#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ehfl/energy.hpp"

namespace ehfl {

/// Candidates are the Lambda longest queues; participants are those with energy.
struct Myopic {
    std::size_t lambda_total;
};

/// Cycles through client ids, Lambda consecutive slots per round.
struct RoundRobin {
    std::size_t lambda_total;
};

/// Every client with a non-empty queue participates; no cap.
struct Greedy {};

/// Energy-blind reference: n rotating clients every round. Not causal.
struct OracleUniform {
    std::size_t n;
};

using SchedulerKind = std::variant<Myopic, RoundRobin, Greedy, OracleUniform>;

std::string scheduler_name(const SchedulerKind& kind);

/// Throws ConfigError when Lambda or n is zero or larger than the client count.
void validate_scheduler(const SchedulerKind& kind, std::size_t num_clients);

struct ScheduleDecision {
    std::vector<ClientId> candidates;    // N_t', in selection order
    std::vector<ClientId> participants;  // N_t, increasing id order
    bool non_causal = false;             // participants were not filtered by energy

    std::size_t n() const noexcept { return participants.size(); }
};

ScheduleDecision myopic_schedule(const EnergyState& state, std::size_t lambda_total);
ScheduleDecision round_robin_schedule(std::size_t round, std::size_t lambda_total, const EnergyState& state);
ScheduleDecision greedy_schedule(const EnergyState& state);
ScheduleDecision oracle_uniform_schedule(std::size_t round, std::size_t n, const EnergyState& state);

ScheduleDecision schedule(const SchedulerKind& kind, std::size_t round, const EnergyState& state);

}  // namespace ehfl

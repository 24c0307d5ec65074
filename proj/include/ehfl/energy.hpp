#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ehfl/rng.hpp"

namespace ehfl {

using ClientId = std::size_t;

/// Static description of the client population's energy harvesting.
struct EnergyConfig {
    std::size_t num_clients = 0;
    std::vector<double> arrival_rates;  // Bernoulli means, one per client
    std::optional<int> capacity;        // nullopt = unbounded battery
    std::vector<int> initial_levels;

    /// Homogeneous population with every battery starting at `initial_level`.
    static EnergyConfig homogeneous(std::size_t clients, double rate, std::optional<int> capacity,
                                    int initial_level = 1);

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Energy units harvested by each client during one round (0 or 1).
struct ArrivalSample {
    std::vector<std::uint8_t> arrivals;
};

/// Battery levels at the start of a round. Levels only change through update_energy.
class EnergyState {
public:
    explicit EnergyState(const EnergyConfig& config);

    std::size_t round() const noexcept { return round_; }
    std::span<const int> levels() const noexcept { return levels_; }
    int level(ClientId i) const { return levels_.at(i); }
    std::size_t num_clients() const noexcept { return levels_.size(); }

    friend EnergyState update_energy(const EnergyState&, std::span<const ClientId>, const ArrivalSample&,
                                     const EnergyConfig&);

    /// Only for tests and tooling that need to pose an arbitrary state.
    static EnergyState from_levels(std::vector<int> levels, std::size_t round = 0);

    friend bool operator==(const EnergyState&, const EnergyState&) = default;

private:
    EnergyState() = default;
    std::size_t round_ = 0;
    std::vector<int> levels_;
};

/// Draws A_i(t) ~ Bernoulli(lambda_i) from each client's own stream.
ArrivalSample sample_arrivals(const EnergyConfig& config, std::span<Engine> client_streams);

/// E_i(t+1) = min(E_i(t) - 1{i in N_t} + A_i(t), E_max).
/// Throws CausalityViolation if a participant holds less than one unit.
EnergyState update_energy(const EnergyState& state, std::span<const ClientId> participated,
                          const ArrivalSample& arrivals, const EnergyConfig& config);

/// Clients with at least one stored unit, in increasing id order.
std::vector<ClientId> available_clients(const EnergyState& state);

}  // namespace ehfl

#include "ehfl/energy.hpp"

#include <algorithm>
#include <string>

#include "ehfl/errors.hpp"

namespace ehfl {

EnergyConfig EnergyConfig::homogeneous(std::size_t clients, double rate, std::optional<int> capacity,
                                       int initial_level) {
    EnergyConfig cfg;
    cfg.num_clients = clients;
    cfg.arrival_rates.assign(clients, rate);
    cfg.capacity = capacity;
    cfg.initial_levels.assign(clients, initial_level);
    return cfg;
}

void EnergyConfig::validate() const {
    if (num_clients == 0) throw ConfigError("energy.clients", "must be positive");
    if (arrival_rates.size() != num_clients)
        throw ConfigError("energy.arrival_rates", "expected " + std::to_string(num_clients) + " entries");
    if (initial_levels.size() != num_clients)
        throw ConfigError("energy.initial_levels", "expected " + std::to_string(num_clients) + " entries");
    for (double r : arrival_rates)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("energy.arrival_rates", "rates must lie in [0, 1]");
    if (capacity && *capacity < 1) throw ConfigError("energy.capacity", "must be a positive integer or inf");
    for (int e : initial_levels) {
        if (e < 0) throw ConfigError("energy.initial_levels", "levels must be non-negative");
        if (capacity && e > *capacity) throw ConfigError("energy.initial_levels", "level exceeds capacity");
    }
}

EnergyState::EnergyState(const EnergyConfig& config) : round_(0), levels_(config.initial_levels) {
    config.validate();
}

EnergyState EnergyState::from_levels(std::vector<int> levels, std::size_t round) {
    EnergyState s;
    s.levels_ = std::move(levels);
    s.round_ = round;
    return s;
}

ArrivalSample sample_arrivals(const EnergyConfig& config, std::span<Engine> client_streams) {
    if (client_streams.size() != config.num_clients)
        throw ShapeMismatch("one arrival stream per client is required");
    ArrivalSample out;
    out.arrivals.resize(config.num_clients);
    for (std::size_t i = 0; i < config.num_clients; ++i)
        out.arrivals[i] = uniform01(client_streams[i]) < config.arrival_rates[i] ? 1 : 0;
    return out;
}

EnergyState update_energy(const EnergyState& state, std::span<const ClientId> participated,
                          const ArrivalSample& arrivals, const EnergyConfig& config) {
    const std::size_t m = state.num_clients();
    if (arrivals.arrivals.size() != m) throw ShapeMismatch("arrival sample size differs from client count");

    std::vector<int> consumed(m, 0);
    for (ClientId i : participated) {
        if (i >= m) throw ShapeMismatch("participant id " + std::to_string(i) + " out of range");
        if (consumed[i]) throw ShapeMismatch("participant id " + std::to_string(i) + " listed twice");
        if (state.levels_[i] < 1)
            throw CausalityViolation("client " + std::to_string(i) + " scheduled with empty battery in round " +
                                     std::to_string(state.round_));
        consumed[i] = 1;
    }

    EnergyState next;
    next.round_ = state.round_ + 1;
    next.levels_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        int e = state.levels_[i] - consumed[i] + arrivals.arrivals[i];
        if (config.capacity) e = std::min(e, *config.capacity);
        next.levels_[i] = e;
    }
    return next;
}

std::vector<ClientId> available_clients(const EnergyState& state) {
    std::vector<ClientId> out;
    const auto levels = state.levels();
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] >= 1) out.push_back(i);
    return out;
}

}  // namespace ehfl

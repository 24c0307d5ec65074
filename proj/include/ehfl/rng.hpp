#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ehfl {

using Engine = std::mt19937_64;

/// Purpose tags for independent stream families derived from one master seed.
enum class StreamDomain : std::uint64_t {
    Arrivals = 1,
    Minibatch = 2,
    TaskGeneration = 3,
    Probing = 4,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream (domain, index) under a master seed. Streams for different
/// indices never depend on how many other indices exist.
std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain, std::uint64_t index);

Engine make_engine(std::uint64_t master, StreamDomain domain, std::uint64_t index);

/// One engine per client, all keyed by (master, domain, client id).
std::vector<Engine> make_client_streams(std::uint64_t master, StreamDomain domain, std::size_t clients);

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

}  // namespace ehfl

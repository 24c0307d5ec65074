#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ehfl/fl_core.hpp"

namespace ehfl {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct TraceHeader {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string artifact_version = kArtifactVersion;
    std::string scheduler;
    std::size_t clients = 0;
    std::size_t rounds = 0;
    bool drift = false;
    bool non_causal = false;
};

struct Trace {
    TraceHeader header;
    std::vector<RoundRecord> records;
};

/// t, n_t, eta_t, loss, grad_norm_sq, E_0..E_{M-1}[, drift]
std::vector<std::string> trace_columns(std::size_t clients, bool drift);

/// First line `# {json header}`, then the column row, then one row per round.
/// Reals are printed with 17 significant digits so they read back bit-exact.
void write_trace(std::ostream& out, const TraceHeader& header, std::span<const RoundRecord> records);
Trace read_trace(std::istream& in);

void write_trace_file(const std::string& path, const TraceHeader& header, std::span<const RoundRecord> records);
Trace read_trace_file(const std::string& path);

}  // namespace ehfl

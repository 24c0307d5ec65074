#include "ehfl/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<std::string> trace_columns(std::size_t clients, bool drift) {
    std::vector<std::string> cols = {"t", "n_t", "eta_t", "loss", "grad_norm_sq"};
    for (std::size_t i = 0; i < clients; ++i) cols.push_back("E_" + std::to_string(i));
    if (drift) cols.push_back("drift");
    return cols;
}

void write_trace(std::ostream& out, const TraceHeader& header, std::span<const RoundRecord> records) {
    const nlohmann::ordered_json h = {
        {"config_hash", header.config_hash}, {"seed", header.seed},   {"artifact_version", header.artifact_version},
        {"scheduler", header.scheduler},     {"clients", header.clients}, {"rounds", header.rounds},
        {"drift", header.drift},             {"non_causal", header.non_causal},
    };
    out << "# " << h.dump() << "\n";
    const auto cols = trace_columns(header.clients, header.drift);
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << "\n";
    for (const auto& r : records) {
        if (r.energy.size() != header.clients) throw ShapeMismatch("energy snapshot width differs from header");
        out << r.t << ',' << r.n_t << ',' << real(r.eta_t) << ',' << real(r.loss) << ',' << real(r.grad_norm_sq);
        for (int e : r.energy) out << ',' << e;
        if (header.drift) out << ',' << (r.drift ? real(*r.drift) : std::string());
        out << "\n";
    }
}

Trace read_trace(std::istream& in) {
    Trace trace;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw ShapeMismatch("trace is missing its '# ' header line");
    try {
        const auto h = nlohmann::json::parse(line.substr(2));
        trace.header.config_hash = h.at("config_hash").get<std::string>();
        trace.header.seed = h.at("seed").get<std::uint64_t>();
        trace.header.artifact_version = h.at("artifact_version").get<std::string>();
        trace.header.scheduler = h.at("scheduler").get<std::string>();
        trace.header.clients = h.at("clients").get<std::size_t>();
        trace.header.rounds = h.at("rounds").get<std::size_t>();
        trace.header.drift = h.at("drift").get<bool>();
        trace.header.non_causal = h.value("non_causal", false);
    } catch (const nlohmann::json::exception& e) {
        throw ShapeMismatch(std::string("bad trace header: ") + e.what());
    }
    const auto expected = trace_columns(trace.header.clients, trace.header.drift);
    if (!std::getline(in, line) || split_csv(line) != expected) throw ShapeMismatch("unexpected trace columns");

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != expected.size()) throw ShapeMismatch("row has the wrong number of cells");
        RoundRecord r;
        try {
            r.t = std::stoull(cells[0]);
            r.n_t = std::stoull(cells[1]);
            r.eta_t = std::stod(cells[2]);
            r.loss = std::stod(cells[3]);
            r.grad_norm_sq = std::stod(cells[4]);
            for (std::size_t i = 0; i < trace.header.clients; ++i) r.energy.push_back(std::stoi(cells[5 + i]));
            if (trace.header.drift && !cells.back().empty()) r.drift = std::stod(cells.back());
        } catch (const std::exception&) {
            throw ShapeMismatch("unparsable trace row: " + line);
        }
        r.non_causal = trace.header.non_causal;
        trace.records.push_back(std::move(r));
    }
    if (trace.records.size() != trace.header.rounds) throw ShapeMismatch("row count differs from header rounds");
    return trace;
}

void write_trace_file(const std::string& path, const TraceHeader& header, std::span<const RoundRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write trace '" + path + "'");
    write_trace(out, header, records);
}

Trace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read trace '" + path + "'");
    return read_trace(in);
}

}  // namespace ehfl

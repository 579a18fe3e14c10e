// Topology blueprint: layer widths, per-layer out-degree schedule, the
// partition layer splitting verge from core, and the verge section count.
#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kdlw/common.hpp"

namespace kdlw {

struct TopologySpec {
    std::vector<int> layer_widths;     // H+2 entries, index 0 = input, H+1 = output
    std::vector<int> degree_schedule;  // H+1 entries, k^(h) = out-degree from layer h
    int partition_layer = 1;           // H*, verge hosts layers 0..H*
    int section_count = 1;             // M

    int hidden_layers() const { return static_cast<int>(layer_widths.size()) - 2; }
    int pair_count() const { return static_cast<int>(layer_widths.size()) - 1; }
    int total_neurons() const {
        return std::accumulate(layer_widths.begin(), layer_widths.end(), 0);
    }
};

// Contiguous block widths: floor(n/M) each, the first n mod M one wider.
inline std::vector<int> section_widths(int n, int m) {
    if (m < 1) throw ConfigError("section count must be >= 1");
    if (m > n) throw ConfigError("section count " + std::to_string(m) + " exceeds layer width " + std::to_string(n));
    std::vector<int> w(static_cast<size_t>(m), n / m);
    for (int i = 0; i < n % m; ++i) w[i] += 1;
    return w;
}

// Section id of a neuron index under the contiguous block rule.
inline int section_of_index(int index, const std::vector<int>& widths) {
    int acc = 0;
    for (size_t s = 0; s < widths.size(); ++s) {
        acc += widths[s];
        if (index < acc) return static_cast<int>(s);
    }
    throw ConfigError("neuron index out of range for section lookup");
}

inline void validate(const TopologySpec& spec, bool layerwise_constraint = true) {
    const int layers = static_cast<int>(spec.layer_widths.size());
    if (layers < 2) throw ConfigError("need at least an input and an output layer");
    for (int w : spec.layer_widths)
        if (w < 1) throw ConfigError("layer widths must be positive");
    if (spec.degree_schedule.size() != spec.layer_widths.size() - 1)
        throw ConfigError("degree schedule length must be layer count - 1");
    const int pairs = spec.pair_count();
    for (int h = 0; h < pairs; ++h) {
        const int k = spec.degree_schedule[h];
        if (k < 1) throw ConfigError("degree schedule entries must be positive");
        if (k > spec.layer_widths[h + 1])
            throw ConfigError("k^(" + std::to_string(h) + ")=" + std::to_string(k) +
                              " exceeds fan-out " + std::to_string(spec.layer_widths[h + 1]));
    }
    if (spec.partition_layer < 1 || spec.partition_layer > std::max(1, spec.hidden_layers()))
        throw ConfigError("partition layer must satisfy 1 <= H* <= H");
    if (spec.section_count < 1) throw ConfigError("section count must be positive");
    if (layerwise_constraint) {
        // per-pair edge totals n_h * k^(h) non-increasing toward the output
        for (int h = 0; h + 1 < pairs; ++h) {
            const long long cur = 1LL * spec.layer_widths[h] * spec.degree_schedule[h];
            const long long nxt = 1LL * spec.layer_widths[h + 1] * spec.degree_schedule[h + 1];
            if (nxt > cur)
                throw ConstraintError("layer-wise constraint violated between pairs " +
                                      std::to_string(h) + " and " + std::to_string(h + 1));
        }
        // degree schedule itself non-increasing, except a full-fan-in last pair
        for (int h = 0; h + 1 < pairs; ++h) {
            const bool last_full = (h + 1 == pairs - 1) &&
                                   spec.degree_schedule[h + 1] == spec.layer_widths[h + 2];
            if (spec.degree_schedule[h + 1] > spec.degree_schedule[h] && !last_full)
                throw ConstraintError("degree schedule must be non-increasing (pair " +
                                      std::to_string(h + 1) + ")");
        }
    }
}

inline std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    return os.str();
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

// Flat key=value text form.
inline std::string serialize(const TopologySpec& spec) {
    std::ostringstream os;
    os << "layer_widths=" << join_ints(spec.layer_widths) << '\n'
       << "degree_schedule=" << join_ints(spec.degree_schedule) << '\n'
       << "partition_layer=" << spec.partition_layer << '\n'
       << "section_count=" << spec.section_count << '\n';
    return os.str();
}

inline TopologySpec parse_topology(std::istream& in) {
    TopologySpec spec;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "layer_widths") spec.layer_widths = parse_int_list(val);
        else if (key == "degree_schedule") spec.degree_schedule = parse_int_list(val);
        else if (key == "partition_layer") spec.partition_layer = std::stoi(val);
        else if (key == "section_count") spec.section_count = std::stoi(val);
        else throw ConfigError("unknown topology key: " + key);
    }
    validate(spec);
    return spec;
}

inline TopologySpec parse_topology_string(const std::string& text) {
    std::istringstream is(text);
    return parse_topology(is);
}

}  // namespace kdlw

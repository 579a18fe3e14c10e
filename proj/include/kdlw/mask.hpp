// Connectivity masks and the density arithmetic of sparse vs dense nets.
#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <vector>

#include "kdlw/common.hpp"
#include "kdlw/topology.hpp"

namespace kdlw {

// Boolean connectivity per adjacent layer pair, row-major n_h x n_{h+1}.
struct EdgeMask {
    std::vector<int> widths;                  // copy of layer widths
    std::vector<std::vector<uint8_t>> pairs;  // pairs[p][i*n_{p+1}+j]

    int pair_count() const { return static_cast<int>(pairs.size()); }

    bool get(int p, int i, int j) const {
        return pairs[p][static_cast<size_t>(i) * widths[p + 1] + j] != 0;
    }
    void set(int p, int i, int j, bool v) {
        pairs[p][static_cast<size_t>(i) * widths[p + 1] + j] = v ? 1 : 0;
    }
    int row_degree(int p, int i) const {
        const int n = widths[p + 1];
        const uint8_t* row = pairs[p].data() + static_cast<size_t>(i) * n;
        return static_cast<int>(std::count(row, row + n, uint8_t{1}));
    }
    long long pair_edge_total(int p) const {
        return std::count(pairs[p].begin(), pairs[p].end(), uint8_t{1});
    }
    long long total_edges() const {
        long long t = 0;
        for (int p = 0; p < pair_count(); ++p) t += pair_edge_total(p);
        return t;
    }
};

inline EdgeMask empty_mask(const TopologySpec& spec) {
    EdgeMask mask;
    mask.widths = spec.layer_widths;
    mask.pairs.resize(static_cast<size_t>(spec.pair_count()));
    for (int p = 0; p < spec.pair_count(); ++p)
        mask.pairs[p].assign(static_cast<size_t>(spec.layer_widths[p]) * spec.layer_widths[p + 1], 0);
    return mask;
}

// Zero out cross-section entries for pairs below the partition layer.
inline void apply_hard_constraint(EdgeMask& mask, const TopologySpec& spec) {
    for (int p = 0; p < spec.partition_layer && p < spec.pair_count(); ++p) {
        const auto src_w = section_widths(spec.layer_widths[p], spec.section_count);
        const auto dst_w = section_widths(spec.layer_widths[p + 1], spec.section_count);
        for (int i = 0; i < spec.layer_widths[p]; ++i) {
            const int si = section_of_index(i, src_w);
            for (int j = 0; j < spec.layer_widths[p + 1]; ++j)
                if (section_of_index(j, dst_w) != si) mask.set(p, i, j, false);
        }
    }
}

inline EdgeMask build_dense_mask(const TopologySpec& spec, bool apply_sections = false) {
    validate(spec, /*layerwise_constraint=*/false);
    EdgeMask mask = empty_mask(spec);
    for (auto& pair : mask.pairs) std::fill(pair.begin(), pair.end(), uint8_t{1});
    if (apply_sections) apply_hard_constraint(mask, spec);
    return mask;
}

// Exact k^(h) out-degree per source neuron; targets drawn without
// replacement, restricted to the same section below the partition layer.
inline EdgeMask build_kdegree_mask(const TopologySpec& spec, uint64_t seed) {
    validate(spec);
    EdgeMask mask = empty_mask(spec);
    Rng rng(seed);
    for (int p = 0; p < spec.pair_count(); ++p) {
        const int k = spec.degree_schedule[p];
        const bool sectioned = p < spec.partition_layer && spec.section_count > 1;
        std::vector<int> src_sections, dst_starts;
        std::vector<std::vector<int>> targets_by_section;
        if (sectioned) {
            const auto src_w = section_widths(spec.layer_widths[p], spec.section_count);
            const auto dst_w = section_widths(spec.layer_widths[p + 1], spec.section_count);
            int start = 0;
            for (int s = 0; s < spec.section_count; ++s) {
                if (k > dst_w[s])
                    throw ConstraintError("k^(" + std::to_string(p) + ")=" + std::to_string(k) +
                                          " exceeds section " + std::to_string(s + 1) +
                                          " width " + std::to_string(dst_w[s]) +
                                          " on layer " + std::to_string(p + 1));
                std::vector<int> t(static_cast<size_t>(dst_w[s]));
                std::iota(t.begin(), t.end(), start);
                targets_by_section.push_back(std::move(t));
                start += dst_w[s];
            }
            for (int i = 0; i < spec.layer_widths[p]; ++i)
                src_sections.push_back(section_of_index(i, src_w));
        }
        std::vector<int> all_targets(static_cast<size_t>(spec.layer_widths[p + 1]));
        std::iota(all_targets.begin(), all_targets.end(), 0);
        std::vector<int> pick;
        for (int i = 0; i < spec.layer_widths[p]; ++i) {
            const auto& pool = sectioned ? targets_by_section[src_sections[i]] : all_targets;
            pick.clear();
            std::sample(pool.begin(), pool.end(), std::back_inserter(pick), k, rng);
            for (int j : pick) mask.set(p, i, j, true);
        }
    }
    return mask;
}

enum class EdgeCountKind { dense, kdegree };

// The published per-pair counts: dense uses n_h*(n_{h+1}+1), one extra
// edge per source neuron (the source text's convention, reproduced
// verbatim); kdegree uses n_h*k^(h).
inline std::vector<long long> paper_edge_count(const TopologySpec& spec, EdgeCountKind kind) {
    validate(spec, /*layerwise_constraint=*/kind == EdgeCountKind::kdegree);
    std::vector<long long> out;
    for (int p = 0; p < spec.pair_count(); ++p) {
        if (kind == EdgeCountKind::dense)
            out.push_back(1LL * spec.layer_widths[p] * (spec.layer_widths[p + 1] + 1));
        else
            out.push_back(1LL * spec.layer_widths[p] * spec.degree_schedule[p]);
    }
    return out;
}

// |E| / (|V| (|V|-1)) for a directed simple graph.
inline double density(long long vertex_count, long long edge_count) {
    if (vertex_count < 2) throw ConfigError("density undefined for fewer than 2 vertices");
    if (edge_count < 0) throw ConfigError("edge count must be nonnegative");
    return static_cast<double>(edge_count) /
           (static_cast<double>(vertex_count) * static_cast<double>(vertex_count - 1));
}

// Limit density of a fully connected net with H hidden layers: (H+1)/(H+2)^2.
inline double dense_density_limit(int hidden_layers) {
    if (hidden_layers < 0) throw ConfigError("H must be nonnegative");
    const double h2 = hidden_layers + 2.0;
    return (hidden_layers + 1.0) / (h2 * h2);
}

// Approximate edge count k*|V|*(H+1)/(H+2) for uniform-k nets; a
// diagnostic, not a substitute for exact mask counts.
inline double kdegree_edge_estimate(long long vertex_count, int hidden_layers, int k) {
    return static_cast<double>(k) * static_cast<double>(vertex_count) *
           (hidden_layers + 1.0) / (hidden_layers + 2.0);
}

// Edge-list text form: "src_layer src_index dst_index", one edge per line.
inline void export_edge_list(const EdgeMask& mask, std::ostream& out) {
    for (int p = 0; p < mask.pair_count(); ++p)
        for (int i = 0; i < mask.widths[p]; ++i)
            for (int j = 0; j < mask.widths[p + 1]; ++j)
                if (mask.get(p, i, j)) out << p << ' ' << i << ' ' << j << '\n';
}

inline EdgeMask import_edge_list(const TopologySpec& spec, std::istream& in) {
    EdgeMask mask = empty_mask(spec);
    int p, i, j;
    while (in >> p >> i >> j) {
        if (p < 0 || p >= mask.pair_count() || i < 0 || i >= mask.widths[p] ||
            j < 0 || j >= mask.widths[p + 1])
            throw IoError("edge list entry out of range");
        mask.set(p, i, j, true);
    }
    return mask;
}

}  // namespace kdlw

// Logical-time simulation of a two-level cluster (one core, M verge
// machines) with parameter-count flow accounting.
#pragma once

#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kdlw/common.hpp"
#include "kdlw/model.hpp"

namespace kdlw {

struct VergeLink {
    int machine = 0;    // verge machine id, 1-based like the section ids
    double ed = 1.0;    // abstract distance to the core
    double ef = 0.0;    // cumulative flow, parameter-count units
};

struct ClusterGraph {
    std::vector<VergeLink> links;  // two-level tree: one link per verge machine
};

inline ClusterGraph make_cluster(const std::vector<double>& distances) {
    ClusterGraph g;
    for (size_t i = 0; i < distances.size(); ++i) {
        if (distances[i] < 0.0) throw ConfigError("distances must be nonnegative");
        g.links.push_back({static_cast<int>(i) + 1, distances[i], 0.0});
    }
    return g;
}

// CC = sum over links of ed * ef; on a two-level tree this is CC_tree.
inline double communication_cost(const ClusterGraph& graph) {
    double cc = 0.0;
    for (const auto& link : graph.links) cc += link.ed * link.ef;
    return cc;
}

struct PartitionPlan {
    int partition_layer = 1;  // H*
    int section_count = 1;    // M
    // section widths per layer 0..H*, contiguous blocks
    std::vector<std::vector<int>> widths;
};

inline PartitionPlan make_partition(const TopologySpec& spec) {
    validate(spec, /*layerwise_constraint=*/false);
    PartitionPlan plan;
    plan.partition_layer = spec.partition_layer;
    plan.section_count = spec.section_count;
    for (int h = 0; h <= spec.partition_layer; ++h)
        plan.widths.push_back(section_widths(spec.layer_widths[h], spec.section_count));
    return plan;
}

enum class SyncPayload { verge_params_up, core_params_down, both };

// How flows are counted: exact mask cardinality plus biases, or the
// published per-pair conventions (dense n_h*(n_{h+1}+1), kdegree n_h*k).
enum class FlowCountMode { mask_exact, paper_dense, paper_kdegree };

struct SyncPolicy {
    int rounds_per_epoch = 1;
    SyncPayload payload = SyncPayload::verge_params_up;
    double bytes_per_parameter = 8.0;  // reporting only
    FlowCountMode count_mode = FlowCountMode::mask_exact;
};

// Parameters held by verge section m (1-based): first-level weights with
// both endpoints in the section, plus its layer 1..H* biases.
inline double verge_section_params(const Model& model, const PartitionPlan& plan, int m,
                                   FlowCountMode mode) {
    const int s = m - 1;
    double count = 0.0;
    for (int p = 0; p < plan.partition_layer; ++p) {
        const int dsrc = plan.widths[p][s];
        const int ddst = plan.widths[p + 1][s];
        switch (mode) {
            case FlowCountMode::paper_dense:
                count += static_cast<double>(dsrc) * (ddst + 1);
                break;
            case FlowCountMode::paper_kdegree:
                count += static_cast<double>(dsrc) * model.spec.degree_schedule[p];
                break;
            case FlowCountMode::mask_exact: {
                int src_start = 0, dst_start = 0;
                for (int t = 0; t < s; ++t) {
                    src_start += plan.widths[p][t];
                    dst_start += plan.widths[p + 1][t];
                }
                for (int i = src_start; i < src_start + dsrc; ++i)
                    for (int j = dst_start; j < dst_start + ddst; ++j)
                        if (model.mask.get(p, i, j)) count += 1.0;
                break;
            }
        }
    }
    if (mode == FlowCountMode::mask_exact)  // paper conventions count edges only
        for (int h = 1; h <= plan.partition_layer; ++h) count += plan.widths[h][s];
    return count;
}

// Parameters of the core level: pairs H*..H plus their biases.
inline double core_params(const Model& model, const PartitionPlan& plan, FlowCountMode mode) {
    double count = 0.0;
    const auto& widths = model.spec.layer_widths;
    for (int p = plan.partition_layer; p < model.pair_count(); ++p) {
        switch (mode) {
            case FlowCountMode::paper_dense:
                count += static_cast<double>(widths[p]) * (widths[p + 1] + 1);
                break;
            case FlowCountMode::paper_kdegree:
                count += static_cast<double>(widths[p]) * model.spec.degree_schedule[p];
                break;
            case FlowCountMode::mask_exact:
                count += static_cast<double>(model.mask.pair_edge_total(p));
                break;
        }
    }
    if (mode == FlowCountMode::mask_exact)
        for (int h = plan.partition_layer + 1; h < static_cast<int>(widths.size()); ++h)
            count += widths[h];
    return count;
}

// One synchronization epoch: rounds_per_epoch rounds of the configured
// payload added to every verge link's cumulative flow.
inline void record_sync(ClusterGraph& graph, const Model& model, const PartitionPlan& plan,
                        const SyncPolicy& policy) {
    if (static_cast<int>(graph.links.size()) != plan.section_count)
        throw ConfigError("cluster link count does not match the section count");
    const double core = (policy.payload != SyncPayload::verge_params_up)
                            ? core_params(model, plan, policy.count_mode)
                            : 0.0;
    for (auto& link : graph.links) {
        double payload = core;
        if (policy.payload != SyncPayload::core_params_down)
            payload += verge_section_params(model, plan, link.machine, policy.count_mode);
        link.ef += policy.rounds_per_epoch * payload;
    }
}

struct SimResult {
    ClusterGraph graph;
    double cc = 0.0;
};

inline SimResult simulate_run(const Model& model, const PartitionPlan& plan,
                              const SyncPolicy& policy, int epochs,
                              const std::vector<double>& distances) {
    if (static_cast<int>(distances.size()) != plan.section_count)
        throw ConfigError("need one distance per verge machine");
    SimResult result;
    result.graph = make_cluster(distances);
    for (int e = 0; e < epochs; ++e) record_sync(result.graph, model, plan, policy);
    result.cc = communication_cost(result.graph);
    return result;
}

// Distances file: one "machine_id distance" per line.
inline std::vector<double> load_distances(const std::string& path, int m) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open distances file: " + path);
    std::vector<double> out(static_cast<size_t>(m), 1.0);
    int id;
    double d;
    while (in >> id >> d) {
        if (id < 1 || id > m) throw IoError("distances file machine id out of range");
        out[id - 1] = d;
    }
    return out;
}

inline void write_ledger_csv(const ClusterGraph& graph, std::ostream& out) {
    out << "link,ed,ef,contribution\n";
    char buf[160];
    for (const auto& link : graph.links) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", link.machine, link.ed, link.ef,
                      link.ed * link.ef);
        out << buf;
    }
}

}  // namespace kdlw

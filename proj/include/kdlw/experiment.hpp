// Experiment orchestration: dense-DBN vs k-degree comparisons over a
// list of data-size multiples, with cost accounting and CSV outputs.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kdlw/common.hpp"
#include "kdlw/datasets.hpp"
#include "kdlw/geosim.hpp"
#include "kdlw/learning.hpp"
#include "kdlw/mask.hpp"
#include "kdlw/metrics.hpp"
#include "kdlw/model.hpp"
#include "kdlw/pruning.hpp"
#include "kdlw/topology.hpp"

namespace kdlw {

struct ExperimentConfig {
    TopologySpec spec;  // k-degree topology; the dense baseline shares the widths
    LossConfig loss;
    TrainConfig train;
    PruneConfig prune;
    SyncPolicy sync;
    std::vector<double> distances;     // empty = all 1.0
    std::vector<int> x_list{1};
    std::string topology_mode = "direct";  // direct | procedure1
    std::string train_images, train_labels;
    std::string valid_images, valid_labels;
    std::string test_images, test_labels;
    int train_per_class = 0;  // 0 = use everything
    double basic_error_rate = 10.0;
    std::string out_dir = ".";
};

inline std::map<std::string, std::string> parse_keyvalue_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline ExperimentConfig parse_experiment_config(const std::string& path) {
    const auto kv = parse_keyvalue_file(path);
    ExperimentConfig cfg;
    auto get = [&](const std::string& key) -> const std::string* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto geti = [&](const std::string& key, int def) {
        const auto* v = get(key);
        return v ? std::stoi(*v) : def;
    };
    auto getd = [&](const std::string& key, double def) {
        const auto* v = get(key);
        return v ? std::stod(*v) : def;
    };
    auto gets = [&](const std::string& key, const std::string& def) {
        const auto* v = get(key);
        return v ? *v : def;
    };
    if (const auto* v = get("layer_widths")) cfg.spec.layer_widths = parse_int_list(*v);
    else throw ConfigError("config missing layer_widths");
    if (const auto* v = get("degree_schedule")) cfg.spec.degree_schedule = parse_int_list(*v);
    else throw ConfigError("config missing degree_schedule");
    cfg.spec.partition_layer = geti("partition_layer", 1);
    cfg.spec.section_count = geti("section_count", 1);
    validate(cfg.spec);
    cfg.loss.lambda1 = getd("lambda1", 1e-5);
    cfg.loss.lambda2 = getd("lambda2", 9e-5);
    cfg.loss.include_reconstruction = geti("include_reconstruction", 0) != 0;
    cfg.train.cd_steps = geti("cd_steps", 1);
    cfg.train.learning_rate = getd("learning_rate", 0.1);
    cfg.train.epochs_pretrain = geti("epochs_pretrain", 1);
    cfg.train.epochs_finetune = geti("epochs_finetune", 10);
    cfg.train.batch_size = geti("batch_size", 10);
    cfg.train.seed = static_cast<uint64_t>(geti("seed", 1));
    cfg.prune.weight_threshold = getd("weight_threshold", 0.05);
    cfg.prune.eval_subset_size = geti("eval_subset_size", 20);
    cfg.prune.max_rounds = geti("max_rounds", 10);
    cfg.prune.seed = cfg.train.seed;
    cfg.sync.rounds_per_epoch = geti("rounds_per_epoch", 1);
    const std::string payload = gets("payload", "verge_up");
    if (payload == "verge_up") cfg.sync.payload = SyncPayload::verge_params_up;
    else if (payload == "core_down") cfg.sync.payload = SyncPayload::core_params_down;
    else if (payload == "both") cfg.sync.payload = SyncPayload::both;
    else throw ConfigError("unknown payload: " + payload);
    cfg.sync.bytes_per_parameter = getd("bytes_per_parameter", 8.0);
    if (const auto* v = get("distances")) {
        std::istringstream is(*v);
        std::string tok;
        while (std::getline(is, tok, ','))
            if (!tok.empty()) cfg.distances.push_back(std::stod(tok));
    } else if (const auto* v2 = get("distances_file")) {
        cfg.distances = load_distances(*v2, cfg.spec.section_count);
    }
    if (const auto* v = get("x_list")) cfg.x_list = parse_int_list(*v);
    cfg.topology_mode = gets("topology_mode", "direct");
    if (cfg.topology_mode != "direct" && cfg.topology_mode != "procedure1")
        throw ConfigError("topology_mode must be direct or procedure1");
    cfg.train_images = gets("train_images", "");
    cfg.train_labels = gets("train_labels", "");
    cfg.valid_images = gets("valid_images", "");
    cfg.valid_labels = gets("valid_labels", "");
    cfg.test_images = gets("test_images", "");
    cfg.test_labels = gets("test_labels", "");
    cfg.train_per_class = geti("train_per_class", 0);
    cfg.basic_error_rate = getd("basic_error_rate", 10.0);
    cfg.out_dir = gets("out_dir", ".");
    return cfg;
}

inline TopologySpec dense_spec_from(const TopologySpec& spec) {
    TopologySpec dense = spec;
    dense.section_count = 1;  // the dense baseline is an unsectioned DBN
    for (int p = 0; p < spec.pair_count(); ++p)
        dense.degree_schedule[p] = spec.layer_widths[p + 1];
    return dense;
}

inline LabeledBatch to_batch(const Dataset& ds) {
    LabeledBatch b;
    b.inputs = ds.images;
    b.labels = ds.labels;
    return b;
}

struct ExperimentOutput {
    std::vector<RunMetrics> metrics;
    std::vector<CostTableRow> table1;
    std::vector<ErrorTableRow> table3_errors;
};

// One training cell: build, pretrain, finetune, evaluate, account.
inline RunMetrics run_cell(const ExperimentConfig& cfg, const std::string& model_name, int x,
                           const Dataset& train, const Dataset& valid, const Dataset& test,
                           Model* out_model) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool dense = model_name == "dense";
    const TopologySpec spec = dense ? dense_spec_from(cfg.spec) : cfg.spec;
    const uint64_t cell_seed = cfg.train.seed * 1000003ULL + static_cast<uint64_t>(x) * 101ULL +
                               (dense ? 0 : 1);
    Model model = [&] {
        if (dense) return make_model(spec, build_dense_mask(spec), cell_seed);
        if (cfg.topology_mode == "direct")
            return make_model(spec, build_kdegree_mask(spec, cell_seed), cell_seed);
        Model m = make_model(spec, build_dense_mask(spec), cell_seed);
        PruneConfig prune = cfg.prune;
        prune.seed = cell_seed;
        run_procedure_one(m, train.images, spec, prune, cfg.train);
        return m;
    }();
    Dataset train_x = replicate_x(train, x, cell_seed + 7);
    TrainConfig tc = cfg.train;
    tc.seed = cell_seed;
    model = pretrain(std::move(model), train_x.images, tc);
    const FinetuneResult ft = finetune(std::move(model), to_batch(train_x), to_batch(valid), tc,
                                       cfg.loss);
    RunMetrics row;
    row.model = model_name;
    row.data_size_units = x;
    row.error_rate_percent = 100.0 * error_rate(ft.model, to_batch(test));
    std::vector<double> distances = cfg.distances;
    if (distances.empty()) distances.assign(static_cast<size_t>(spec.section_count), 1.0);
    SyncPolicy policy = cfg.sync;
    policy.count_mode = dense ? FlowCountMode::paper_dense : FlowCountMode::paper_kdegree;
    const PartitionPlan plan = make_partition(spec);
    const SimResult sim = simulate_run(ft.model, plan, policy, cfg.train.epochs_finetune * x,
                                       distances);
    row.cc = sim.cc;
    row.convergence_speed = convergence_speed(cfg.basic_error_rate, row.error_rate_percent, 1.0,
                                              static_cast<double>(x));
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (out_model) *out_model = ft.model;
    // trace CSV per cell
    std::ofstream trace(cfg.out_dir + "/trace_" + model_name + "_x" + std::to_string(x) + ".csv");
    write_trace_csv(ft.trace, trace);
    std::ofstream ledger(cfg.out_dir + "/ledger_" + model_name + "_x" + std::to_string(x) + ".csv");
    write_ledger_csv(sim.graph, ledger);
    return row;
}

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    if (cfg.train_images.empty() || cfg.test_images.empty())
        throw ConfigError("experiment needs train and test IDX paths");
    std::filesystem::create_directories(cfg.out_dir);
    Dataset train = load_idx(cfg.train_images, cfg.train_labels, Split::train);
    if (cfg.train_per_class > 0) train = take_per_class(train, cfg.train_per_class);
    Dataset valid = cfg.valid_images.empty()
                        ? load_idx(cfg.test_images, cfg.test_labels, Split::valid)
                        : load_idx(cfg.valid_images, cfg.valid_labels, Split::valid);
    Dataset test = load_idx(cfg.test_images, cfg.test_labels, Split::test);
    ExperimentOutput out;
    const auto flush = [&] {
        std::ofstream m(cfg.out_dir + "/metrics.csv");
        emit_metrics_csv(out.metrics, m);
    };
    std::string stage = "setup";
    try {
        for (int x : cfg.x_list) {
            stage = "dense x=" + std::to_string(x);
            RunMetrics d = run_cell(cfg, "dense", x, train, valid, test, nullptr);
            stage = "kdegree x=" + std::to_string(x);
            RunMetrics k = run_cell(cfg, "kdegree", x, train, valid, test, nullptr);
            d.relative_cost_percent = 0.0;
            k.relative_cost_percent = d.convergence_speed > 0.0
                                          ? relative_cost(d.convergence_speed, k.convergence_speed)
                                          : 0.0;
            out.metrics.push_back(d);
            out.metrics.push_back(k);
            out.table1.push_back({x, d.cc, k.cc});
            out.table3_errors.push_back({x, d.error_rate_percent, k.error_rate_percent});
            flush();
        }
    } catch (const std::exception& e) {
        flush();
        throw ConfigError("experiment failed at stage [" + stage + "]: " + e.what());
    }
    {
        std::ofstream t1(cfg.out_dir + "/table1.csv");
        emit_table1(out.table1, t1);
        std::ofstream t3(cfg.out_dir + "/table3.csv");
        emit_table3(speed_table(out.table3_errors, cfg.basic_error_rate), t3);
    }
    return out;
}

}  // namespace kdlw

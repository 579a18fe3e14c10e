// kdlw command-line front end: topology dry-runs, training, pruning,
// cluster simulation, table arithmetic, and full experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdlw/datasets.hpp"
#include "kdlw/experiment.hpp"
#include "kdlw/geosim.hpp"
#include "kdlw/learning.hpp"
#include "kdlw/mask.hpp"
#include "kdlw/metrics.hpp"
#include "kdlw/model.hpp"
#include "kdlw/pruning.hpp"
#include "kdlw/topology.hpp"

namespace {

std::string join_ll(const std::vector<long long>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    return os.str();
}

void cmd_topology(const kdlw::ExperimentConfig& cfg) {
    using namespace kdlw;
    const TopologySpec& spec = cfg.spec;
    const TopologySpec dense = dense_spec_from(spec);
    std::cout << "layer_widths " << join_ints(spec.layer_widths) << '\n';
    std::cout << "degree_schedule " << join_ints(spec.degree_schedule) << '\n';
    std::cout << "dense_edges " << join_ll(paper_edge_count(spec, EdgeCountKind::dense)) << '\n';
    std::cout << "kdegree_edges " << join_ll(paper_edge_count(spec, EdgeCountKind::kdegree))
              << '\n';
    const EdgeMask dense_mask = build_dense_mask(dense);
    const EdgeMask kdeg_mask = build_kdegree_mask(spec, cfg.train.seed);
    std::vector<long long> dense_true, kdeg_true;
    for (int p = 0; p < spec.pair_count(); ++p) {
        dense_true.push_back(dense_mask.pair_edge_total(p));
        kdeg_true.push_back(kdeg_mask.pair_edge_total(p));
    }
    std::cout << "dense_mask_edges " << join_ll(dense_true) << '\n';
    std::cout << "kdegree_mask_edges " << join_ll(kdeg_true) << '\n';
    const long long v = spec.total_neurons();
    long long de = 0, ke = 0;
    for (long long e : paper_edge_count(spec, EdgeCountKind::dense)) de += e;
    for (long long e : kdeg_true) ke += e;
    const int h = spec.hidden_layers();
    std::cout << "vertices " << v << '\n';
    std::cout << "dense_density " << density(v, de) << '\n';
    std::cout << "kdegree_density " << density(v, ke) << '\n';
    std::cout << "dense_density_limit " << dense_density_limit(h) << '\n';
    std::cout << "kdegree_edge_estimate " << kdegree_edge_estimate(v, h, spec.degree_schedule[0])
              << '\n';
}

kdlw::Dataset load_train(const kdlw::ExperimentConfig& cfg) {
    using namespace kdlw;
    if (cfg.train_images.empty()) throw ConfigError("config needs train_images/train_labels");
    Dataset train = load_idx(cfg.train_images, cfg.train_labels, Split::train);
    if (cfg.train_per_class > 0) train = take_per_class(train, cfg.train_per_class);
    std::cerr << "train fingerprint " << fingerprint(train) << " (" << train.size()
              << " samples)\n";
    return train;
}

void cmd_train(const kdlw::ExperimentConfig& cfg, const std::string& model_kind) {
    using namespace kdlw;
    std::filesystem::create_directories(cfg.out_dir);
    const Dataset train = load_train(cfg);
    const Dataset valid = cfg.valid_images.empty()
                              ? load_idx(cfg.test_images, cfg.test_labels, Split::valid)
                              : load_idx(cfg.valid_images, cfg.valid_labels, Split::valid);
    const bool dense = model_kind == "dense";
    const TopologySpec spec = dense ? dense_spec_from(cfg.spec) : cfg.spec;
    Model model = dense ? make_model(spec, build_dense_mask(spec), cfg.train.seed)
                        : make_model(spec, build_kdegree_mask(spec, cfg.train.seed),
                                     cfg.train.seed);
    model = pretrain(std::move(model), train.images, cfg.train);
    const FinetuneResult ft = finetune(std::move(model), to_batch(train), to_batch(valid),
                                       cfg.train, cfg.loss);
    const std::string ckpt = cfg.out_dir + "/" + model_kind + ".ckpt";
    save_checkpoint(ft.model, ckpt);
    std::ofstream trace(cfg.out_dir + "/trace_" + model_kind + ".csv");
    write_trace_csv(ft.trace, trace);
    std::cout << "checkpoint " << ckpt << '\n';
    std::cout << "best_valid_loss " << ft.best_valid_loss << '\n';
    std::cout << "final_valid_error_rate "
              << (ft.trace.empty() ? 0.0 : ft.trace.back().valid_error_rate) << '\n';
    if (ft.nll_clamps > 0) std::cout << "nll_clamps " << ft.nll_clamps << '\n';
}

void cmd_prune(const kdlw::ExperimentConfig& cfg, const std::string& in_ckpt) {
    using namespace kdlw;
    std::filesystem::create_directories(cfg.out_dir);
    const Dataset train = load_train(cfg);
    Model model = in_ckpt.empty()
                      ? make_model(cfg.spec, build_dense_mask(cfg.spec), cfg.train.seed)
                      : load_checkpoint(in_ckpt);
    std::vector<AuditRow> audit;
    run_procedure_one(model, train.images, cfg.spec, cfg.prune, cfg.train, &audit);
    const std::string ckpt = cfg.out_dir + "/pruned.ckpt";
    save_checkpoint(model, ckpt);
    std::ofstream log(cfg.out_dir + "/prune_audit.csv");
    write_audit_csv(audit, log);
    std::vector<long long> counts;
    for (int p = 0; p < model.pair_count(); ++p) counts.push_back(model.mask.pair_edge_total(p));
    std::cout << "checkpoint " << ckpt << '\n';
    std::cout << "pruned_edges " << join_ll(counts) << '\n';
}

void cmd_simulate(const kdlw::ExperimentConfig& cfg, const std::string& model_kind, int epochs) {
    using namespace kdlw;
    std::filesystem::create_directories(cfg.out_dir);
    const bool dense = model_kind == "dense";
    const TopologySpec spec = dense ? dense_spec_from(cfg.spec) : cfg.spec;
    // keep the configured section layout for the cost accounting
    TopologySpec placed = spec;
    placed.section_count = cfg.spec.section_count;
    const Model model = dense
                            ? make_model(spec, build_dense_mask(spec), cfg.train.seed)
                            : make_model(spec, build_kdegree_mask(spec, cfg.train.seed),
                                         cfg.train.seed);
    SyncPolicy policy = cfg.sync;
    policy.count_mode = dense ? FlowCountMode::paper_dense : FlowCountMode::paper_kdegree;
    const PartitionPlan plan = make_partition(placed);
    std::vector<double> distances = cfg.distances;
    if (distances.empty()) distances.assign(static_cast<size_t>(placed.section_count), 1.0);
    const SimResult sim = simulate_run(model, plan, policy, epochs, distances);
    std::ofstream ledger(cfg.out_dir + "/ledger_" + model_kind + ".csv");
    write_ledger_csv(sim.graph, ledger);
    std::cout << "model " << model_kind << '\n';
    std::cout << "epochs " << epochs << '\n';
    std::cout << "cc_parameter_units " << sim.cc << '\n';
    std::cout << "cc_bytes " << sim.cc * policy.bytes_per_parameter << '\n';
    std::cout << "note absolute costs depend on the distance and sync settings "
                 "(defaults: ed=1 per link, 1 round per epoch); compare ratios between "
                 "models, not absolute values\n";
}

void cmd_metrics(const std::string& errors_csv, double basic_error_rate) {
    using namespace kdlw;
    std::ifstream in(errors_csv);
    if (!in) throw IoError("cannot open error-rate CSV: " + errors_csv);
    std::vector<ErrorTableRow> rows;
    std::string line;
    std::getline(in, line);  // header: data_size,error_dense,error_kdegree
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string a, b, c;
        std::getline(is, a, ',');
        std::getline(is, b, ',');
        std::getline(is, c, ',');
        rows.push_back({std::stoi(a), std::stod(b), std::stod(c)});
    }
    emit_table3(speed_table(rows, basic_error_rate), std::cout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-degree layer-wise network simulator"};
    app.require_subcommand(1);

    std::string config_path, model_kind = "kdegree", in_ckpt, errors_csv, out_dir;
    int epochs = 1;
    double basic_error_rate = 10.0;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key=value config file")->required();
        sub->add_option("--out-dir", out_dir, "override the config's out_dir");
    };

    auto* topology = app.add_subcommand("topology", "edge counts and densities, no training");
    add_config(topology);
    auto* train = app.add_subcommand("train", "pre-train and fine-tune one model");
    add_config(train);
    train->add_option("--model", model_kind, "dense or kdegree");
    auto* prune = app.add_subcommand("prune", "degree-constrained construction");
    add_config(prune);
    prune->add_option("--checkpoint", in_ckpt, "start from this checkpoint instead of fresh init");
    auto* simulate = app.add_subcommand("simulate", "communication-cost accounting");
    add_config(simulate);
    simulate->add_option("--model", model_kind, "dense or kdegree");
    simulate->add_option("--epochs", epochs, "sync epochs to record");
    auto* metrics = app.add_subcommand("metrics", "convergence-speed table from an error CSV");
    metrics->add_option("--errors", errors_csv, "CSV: data_size,error_dense,error_kdegree")
        ->required();
    metrics->add_option("--basic-error-rate", basic_error_rate, "baseline error rate percent");
    auto* experiment = app.add_subcommand("experiment", "full dense vs k-degree comparison");
    add_config(experiment);

    CLI11_PARSE(app, argc, argv);

    try {
        if (metrics->parsed()) {
            cmd_metrics(errors_csv, basic_error_rate);
            return 0;
        }
        kdlw::ExperimentConfig cfg = kdlw::parse_experiment_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (topology->parsed()) cmd_topology(cfg);
        else if (train->parsed()) cmd_train(cfg, model_kind);
        else if (prune->parsed()) cmd_prune(cfg, in_ckpt);
        else if (simulate->parsed()) cmd_simulate(cfg, model_kind, epochs);
        else if (experiment->parsed()) kdlw::run_experiment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kdlw/geosim.hpp"

using namespace kdlw;

namespace {

TopologySpec paper_kdegree() {
    TopologySpec s;
    s.layer_widths = {784, 580, 450, 310, 160, 75, 10};
    s.degree_schedule = {50, 50, 50, 50, 50, 10};
    s.partition_layer = 2;
    s.section_count = 5;
    return s;
}

TopologySpec paper_dense(int sections = 1) {
    TopologySpec s = paper_kdegree();
    s.degree_schedule = {580, 450, 310, 160, 75, 10};
    s.section_count = sections;
    return s;
}

}  // namespace

TEST_CASE("communication cost is the distance-weighted flow sum") {
    ClusterGraph g = make_cluster({1.0, 1.0});
    g.links[0].ef = 10.0;
    g.links[1].ef = 20.0;
    CHECK(communication_cost(g) == 30.0);
    ClusterGraph idle = make_cluster({3.0, 5.0, 7.0});
    CHECK(communication_cost(idle) == 0.0);
}

TEST_CASE("partition plans follow the remainder rule") {
    TopologySpec s;
    s.layer_widths = {10, 10, 4};
    s.degree_schedule = {4, 4};
    s.partition_layer = 1;
    s.section_count = 5;
    const PartitionPlan plan = make_partition(s);
    CHECK(plan.widths[0] == std::vector<int>{2, 2, 2, 2, 2});
    const PartitionPlan paper = make_partition(paper_kdegree());
    CHECK(paper.widths[0] == std::vector<int>{157, 157, 157, 157, 156});
    s.section_count = 1;
    CHECK(make_partition(s).widths[0] == std::vector<int>{10});
    s.section_count = 11;
    CHECK_THROWS_AS(make_partition(s), ConfigError);
}

TEST_CASE("verge payload for the k-degree setup matches the parameter oracle") {
    const TopologySpec spec = paper_kdegree();
    const Model model = make_model(spec, build_kdegree_mask(spec, 3), 3);
    const PartitionPlan plan = make_partition(spec);
    ClusterGraph g = make_cluster(std::vector<double>(5, 1.0));
    SyncPolicy policy;  // verge_params_up, exact counting, one round
    record_sync(g, model, plan, policy);
    // oracle: first-level mask cardinality per section plus its biases
    double expected_total = 0.0;
    for (int m = 1; m <= 5; ++m) {
        double count = 0.0;
        for (int p = 0; p < spec.partition_layer; ++p) {
            const auto sw = section_widths(spec.layer_widths[p], 5);
            const auto dw = section_widths(spec.layer_widths[p + 1], 5);
            for (int i = 0; i < spec.layer_widths[p]; ++i)
                for (int j = 0; j < spec.layer_widths[p + 1]; ++j)
                    if (model.mask.get(p, i, j) && section_of_index(i, sw) == m - 1 &&
                        section_of_index(j, dw) == m - 1)
                        count += 1.0;
        }
        for (int h = 1; h <= spec.partition_layer; ++h)
            count += section_widths(spec.layer_widths[h], 5)[m - 1];
        CHECK(verge_section_params(model, plan, m, FlowCountMode::mask_exact) == count);
        expected_total += count;
    }
    double flow_total = 0.0;
    for (const auto& link : g.links) flow_total += link.ef;
    CHECK(flow_total == expected_total);
    CHECK(flow_total == 39200 + 29000 + 580 + 450);  // published weight counts + biases
}

TEST_CASE("zero rounds leave the graph unchanged and rounds scale linearly") {
    const TopologySpec spec = paper_kdegree();
    const Model model = make_model(spec, build_kdegree_mask(spec, 3), 3);
    const PartitionPlan plan = make_partition(spec);
    SyncPolicy policy;
    policy.rounds_per_epoch = 0;
    ClusterGraph g = make_cluster(std::vector<double>(5, 1.0));
    record_sync(g, model, plan, policy);
    CHECK(communication_cost(g) == 0.0);
    policy.rounds_per_epoch = 1;
    ClusterGraph one = make_cluster(std::vector<double>(5, 1.0));
    record_sync(one, model, plan, policy);
    policy.rounds_per_epoch = 2;
    ClusterGraph two = make_cluster(std::vector<double>(5, 1.0));
    record_sync(two, model, plan, policy);
    for (size_t i = 0; i < one.links.size(); ++i)
        CHECK(two.links[i].ef == 2.0 * one.links[i].ef);
}

TEST_CASE("simulation is linear in epochs and scale-invariant in distance") {
    const TopologySpec spec = paper_kdegree();
    const Model model = make_model(spec, build_kdegree_mask(spec, 3), 3);
    const PartitionPlan plan = make_partition(spec);
    SyncPolicy policy;
    policy.payload = SyncPayload::both;
    const std::vector<double> d{1.0, 2.0, 0.5, 3.0, 1.5};
    CHECK(simulate_run(model, plan, policy, 0, d).cc == 0.0);
    const double c1 = simulate_run(model, plan, policy, 3, d).cc;
    const double c2 = simulate_run(model, plan, policy, 6, d).cc;
    CHECK(c2 == 2.0 * c1);
    std::vector<double> scaled(d);
    for (double& v : scaled) v *= 4.0;
    CHECK(simulate_run(model, plan, policy, 3, scaled).cc == 4.0 * c1);
    // additivity: concatenated runs sum
    const double c5 = simulate_run(model, plan, policy, 5, d).cc;
    CHECK(c5 == simulate_run(model, plan, policy, 2, d).cc +
                    simulate_run(model, plan, policy, 3, d).cc);
}

TEST_CASE("paper counting conventions reproduce the published totals at M=1") {
    TopologySpec kspec = paper_kdegree();
    kspec.section_count = 1;
    const Model kmodel = make_model(kspec, build_kdegree_mask(kspec, 3), 3);
    SyncPolicy policy;
    policy.payload = SyncPayload::both;
    policy.count_mode = FlowCountMode::paper_kdegree;
    const double ck = simulate_run(kmodel, make_partition(kspec), policy, 1, {1.0}).cc;
    CHECK(ck == 114950.0);
    TopologySpec dspec = paper_dense();
    const Model dmodel = make_model(dspec, build_dense_mask(dspec), 3);
    policy.count_mode = FlowCountMode::paper_dense;
    const double cd = simulate_run(dmodel, make_partition(dspec), policy, 1, {1.0}).cc;
    CHECK(cd == 919929.0);
    CHECK_THAT(cd / ck, Catch::Matchers::WithinAbs(8.003, 2e-3));
}

TEST_CASE("cross-section weight positions cannot influence the forward pass") {
    TopologySpec spec;
    spec.layer_widths = {8, 8, 4};
    spec.degree_schedule = {2, 2};
    spec.partition_layer = 1;
    spec.section_count = 4;
    Model model = make_model(spec, build_kdegree_mask(spec, 6), 6, 0.3);
    const std::vector<double> x{0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6};
    const auto before = forward(model, x);
    const auto sw = section_widths(8, 4);
    bool perturbed = false;
    for (int i = 0; i < 8 && !perturbed; ++i)
        for (int j = 0; j < 8 && !perturbed; ++j)
            if (section_of_index(i, sw) != section_of_index(j, sw)) {
                model.weights[0].at(i, j) += 5.0;  // illegal position
                perturbed = true;
            }
    REQUIRE(perturbed);
    model.clamp_to_mask();
    CHECK(forward(model, x).back() == before.back());
}

TEST_CASE("distances file round trip and ledger header") {
    const auto path = (std::filesystem::temp_directory_path() / "kdlw_dist.txt").string();
    {
        std::ofstream out(path);
        out << "1 2.5\n3 0.5\n";
    }
    const auto d = load_distances(path, 3);
    CHECK(d == std::vector<double>{2.5, 1.0, 0.5});
    std::remove(path.c_str());
    ClusterGraph g = make_cluster({2.0});
    g.links[0].ef = 3.0;
    std::ostringstream os;
    write_ledger_csv(g, os);
    CHECK(os.str().rfind("link,ed,ef,contribution\n", 0) == 0);
}

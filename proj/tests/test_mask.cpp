#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "kdlw/mask.hpp"

using namespace kdlw;

namespace {

TopologySpec paper_spec() {
    TopologySpec s;
    s.layer_widths = {784, 580, 450, 310, 160, 75, 10};
    s.degree_schedule = {50, 50, 50, 50, 50, 10};
    s.partition_layer = 2;
    s.section_count = 5;
    return s;
}

TopologySpec simple(std::vector<int> widths, std::vector<int> sched) {
    TopologySpec s;
    s.layer_widths = std::move(widths);
    s.degree_schedule = std::move(sched);
    return s;
}

}  // namespace

TEST_CASE("dense mask is the full bipartite graph") {
    CHECK(build_dense_mask(simple({2, 1}, {1})).total_edges() == 2);
    CHECK(build_dense_mask(simple({1, 1}, {1})).total_edges() == 1);
    const EdgeMask m = build_dense_mask(paper_spec());
    const std::vector<long long> want{454720, 261000, 139500, 49600, 12000, 750};
    for (int p = 0; p < m.pair_count(); ++p) CHECK(m.pair_edge_total(p) == want[p]);
}

TEST_CASE("k-degree mask hits the published per-pair counts") {
    const EdgeMask m = build_kdegree_mask(paper_spec(), 7);
    const std::vector<long long> want{39200, 29000, 22500, 15500, 8000, 750};
    for (int p = 0; p < m.pair_count(); ++p) CHECK(m.pair_edge_total(p) == want[p]);
}

TEST_CASE("k-degree trivia: one edge per row, and k equal to fan-out fills the pair") {
    const EdgeMask two = build_kdegree_mask(simple({2, 2}, {1}), 3);
    CHECK(two.total_edges() == 2);
    CHECK(two.row_degree(0, 0) == 1);
    CHECK(two.row_degree(0, 1) == 1);
    const EdgeMask full = build_kdegree_mask(simple({3, 2}, {2}), 3);
    CHECK(full.total_edges() == 6);
}

TEST_CASE("every source row has exactly k true entries") {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        TopologySpec s;
        const int layers = 2 + static_cast<int>(rng() % 3);
        int prev_budget = 1 << 30;
        for (int l = 0; l <= layers; ++l)
            s.layer_widths.push_back(2 + static_cast<int>(rng() % 20));
        for (int l = 0; l < layers; ++l) {
            int k = 1 + static_cast<int>(rng() % s.layer_widths[l + 1]);
            while (1LL * s.layer_widths[l] * k > prev_budget) --k;
            if (k < 1) k = 1;
            s.degree_schedule.push_back(k);
            prev_budget = s.layer_widths[l] * k;
        }
        try {
            validate(s);
        } catch (const std::exception&) {
            continue;  // the random draw broke a schedule rule; skip it
        }
        const EdgeMask m = build_kdegree_mask(s, rng());
        for (int p = 0; p < m.pair_count(); ++p)
            for (int i = 0; i < s.layer_widths[p]; ++i)
                REQUIRE(m.row_degree(p, i) == s.degree_schedule[p]);
    }
}

TEST_CASE("hard constraint zeroes cross-section blocks below the partition layer") {
    const TopologySpec spec = paper_spec();
    const EdgeMask m = build_kdegree_mask(spec, 11);
    for (int p = 0; p < spec.partition_layer; ++p) {
        const auto sw = section_widths(spec.layer_widths[p], spec.section_count);
        const auto dw = section_widths(spec.layer_widths[p + 1], spec.section_count);
        for (int i = 0; i < spec.layer_widths[p]; i += 13)
            for (int j = 0; j < spec.layer_widths[p + 1]; j += 7)
                if (section_of_index(i, sw) != section_of_index(j, dw))
                    REQUIRE_FALSE(m.get(p, i, j));
    }
}

TEST_CASE("infeasible same-section degree names the layer and section") {
    TopologySpec s = simple({8, 8}, {5});
    s.section_count = 4;  // section width 2 < k=5
    s.partition_layer = 1;
    try {
        build_kdegree_mask(s, 1);
        FAIL("expected ConstraintError");
    } catch (const ConstraintError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("section") != std::string::npos);
        CHECK(msg.find("layer") != std::string::npos);
    }
}

TEST_CASE("published edge counts use the per-source +1 convention for dense") {
    const auto dense = paper_edge_count(paper_spec(), EdgeCountKind::dense);
    CHECK(dense == std::vector<long long>{455504, 261580, 139950, 49910, 12160, 825});
    const auto kdeg = paper_edge_count(paper_spec(), EdgeCountKind::kdegree);
    CHECK(kdeg == std::vector<long long>{39200, 29000, 22500, 15500, 8000, 750});
    CHECK(paper_edge_count(simple({1, 1}, {1}), EdgeCountKind::dense) ==
          std::vector<long long>{2});
}

TEST_CASE("dense reported counts exceed true mask cardinality by n_h per pair") {
    const TopologySpec spec = paper_spec();
    const EdgeMask m = build_dense_mask(spec);
    const auto reported = paper_edge_count(spec, EdgeCountKind::dense);
    for (int p = 0; p < spec.pair_count(); ++p)
        CHECK(reported[p] - m.pair_edge_total(p) == spec.layer_widths[p]);
}

TEST_CASE("density arithmetic") {
    CHECK(density(3, 6) == 1.0);
    CHECK(density(3, 0) == 0.0);
    CHECK_THROWS_AS(density(1, 0), ConfigError);
    CHECK_THAT(density(2369, 919929), Catch::Matchers::WithinAbs(0.1640, 5e-4));
}

TEST_CASE("dense density limit") {
    CHECK_THAT(dense_density_limit(5), Catch::Matchers::WithinAbs(6.0 / 49.0, 1e-15));
    CHECK(dense_density_limit(0) == 0.25);
    double prev = dense_density_limit(1);
    for (int h = 2; h < 40; ++h) {
        const double cur = dense_density_limit(h);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("approximate k-degree edge count") {
    CHECK_THAT(kdegree_edge_estimate(2369, 5, 50),
               Catch::Matchers::WithinRel(50.0 * 2369 * 6.0 / 7.0, 1e-12));
    CHECK(kdegree_edge_estimate(100, 3, 0) == 0.0);
    CHECK_THAT(kdegree_edge_estimate(7, 5, 1), Catch::Matchers::WithinAbs(6.0, 1e-12));
}

TEST_CASE("k-degree density vanishes as widths scale") {
    double prev = 1.0;
    for (int s : {1, 2, 4, 8}) {
        TopologySpec spec = simple({32 * s, 32 * s, 32 * s, 32 * s}, {8, 8, 8});
        const EdgeMask m = build_kdegree_mask(spec, 5);
        const double rho = density(spec.total_neurons(), m.total_edges());
        CHECK(rho < prev);
        CHECK(rho <= 8.0 / (spec.total_neurons() - 1) * 1.0001);
        prev = rho;
    }
}

TEST_CASE("layer-wise totals are non-increasing on constructed masks") {
    const EdgeMask m = build_kdegree_mask(paper_spec(), 21);
    for (int p = 0; p + 1 < m.pair_count(); ++p)
        CHECK(m.pair_edge_total(p + 1) <= m.pair_edge_total(p));
}

TEST_CASE("edge list export/import round trips") {
    const TopologySpec spec = simple({6, 5, 4}, {3, 2});
    const EdgeMask m = build_kdegree_mask(spec, 123);
    std::stringstream ss;
    export_edge_list(m, ss);
    const EdgeMask back = import_edge_list(spec, ss);
    CHECK(back.pairs == m.pairs);
    std::stringstream bad("0 99 0\n");
    CHECK_THROWS_AS(import_edge_list(spec, bad), IoError);
}

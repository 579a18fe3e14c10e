#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <sstream>

#include "kdlw/topology.hpp"

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
}  // namespace

TEST_CASE("valid specs pass validation") {
    CHECK_NOTHROW(validate(paper_spec()));
    TopologySpec tiny;
    tiny.layer_widths = {2, 2};
    tiny.degree_schedule = {1};
    CHECK_NOTHROW(validate(tiny));
}

TEST_CASE("schedule length must match layer count") {
    TopologySpec s = paper_spec();
    s.degree_schedule.pop_back();
    CHECK_THROWS_AS(validate(s), ConfigError);
}

TEST_CASE("out-degree cannot exceed fan-out") {
    TopologySpec s;
    s.layer_widths = {4, 3};
    s.degree_schedule = {4};
    CHECK_THROWS_AS(validate(s), ConfigError);
}

TEST_CASE("layer-wise constraint rejects growing pair totals") {
    TopologySpec s;
    s.layer_widths = {4, 8, 8};
    s.degree_schedule = {2, 8};  // 4*2 < 8*8
    s.partition_layer = 1;
    CHECK_THROWS_AS(validate(s), ConstraintError);
    CHECK_NOTHROW(validate(s, /*layerwise_constraint=*/false));
}

TEST_CASE("last pair may use full fan-in despite a smaller k above") {
    TopologySpec s;
    s.layer_widths = {100, 10, 8};
    s.degree_schedule = {5, 8};  // 8 > 5 but equals the output width
    s.partition_layer = 1;
    CHECK_NOTHROW(validate(s));
}

TEST_CASE("partition layer bounds") {
    TopologySpec s = paper_spec();
    s.partition_layer = 0;
    CHECK_THROWS_AS(validate(s), ConfigError);
    s.partition_layer = 6;  // H = 5
    CHECK_THROWS_AS(validate(s), ConfigError);
}

TEST_CASE("section widths follow the remainder rule") {
    CHECK(section_widths(10, 5) == std::vector<int>{2, 2, 2, 2, 2});
    CHECK(section_widths(784, 5) == std::vector<int>{157, 157, 157, 157, 156});
    CHECK(section_widths(7, 3) == std::vector<int>{3, 2, 2});
}

TEST_CASE("section widths always sum to the layer width") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 900);
        const int m = 1 + static_cast<int>(rng() % n);
        const auto w = section_widths(n, m);
        CHECK(std::accumulate(w.begin(), w.end(), 0) == n);
        CHECK(*std::max_element(w.begin(), w.end()) -
                  *std::min_element(w.begin(), w.end()) <= 1);
    }
}

TEST_CASE("section lookup matches contiguous blocks") {
    const auto w = section_widths(10, 3);  // 4,3,3
    CHECK(section_of_index(0, w) == 0);
    CHECK(section_of_index(3, w) == 0);
    CHECK(section_of_index(4, w) == 1);
    CHECK(section_of_index(9, w) == 2);
}

TEST_CASE("key=value serialization round trips") {
    const TopologySpec s = paper_spec();
    const std::string text = serialize(s);
    const TopologySpec back = parse_topology_string(text);
    CHECK(back.layer_widths == s.layer_widths);
    CHECK(back.degree_schedule == s.degree_schedule);
    CHECK(back.partition_layer == s.partition_layer);
    CHECK(back.section_count == s.section_count);
}

TEST_CASE("unknown topology keys are rejected") {
    CHECK_THROWS_AS(parse_topology_string("layer_widths=2,2\ndegree_schedule=1\nbogus=1\n"),
                    ConfigError);
}

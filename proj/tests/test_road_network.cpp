#include <doctest.h>

#include <algorithm>
#include <set>

#include "policygnn/log.hpp"
#include "support.hpp"

using namespace policygnn;

TEST_SUITE("road_network") {

TEST_CASE("smallest valid network") {
  auto net = network_from_json(nlohmann::json::parse(R"({
    "nodes": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 1, "y": 0}],
    "edges": [{"id": 1, "from": "a", "to": "b", "capacity": 10, "free_flow_time": 1, "length": 1,
               "highway_class": "primary"}]})"));
  CHECK(net.edges().size() == 1);
  CHECK(net.edges()[0].id == "1");
}

TEST_CASE("dangling edge endpoint is rejected with its record") {
  const auto doc = nlohmann::json::parse(R"({
    "nodes": [{"id": "a", "x": 0, "y": 0}],
    "edges": [{"id": "e", "from": "a", "to": "Z", "capacity": 10, "free_flow_time": 1, "length": 1,
               "highway_class": "primary"}]})");
  try {
    network_from_json(doc);
    FAIL("expected NetworkError");
  } catch (const NetworkError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("Z") != std::string::npos);
    CHECK(msg.find("edge") != std::string::npos);
  }
}

TEST_CASE("invalid attributes are rejected") {
  std::vector<Node> nodes{{"a", 0, 0}, {"b", 1, 0}};
  auto bad = testing::make_edge("e", "a", "b", 0.0);
  CHECK_THROWS_AS(RoadNetwork::create(nodes, {bad}, {}), NetworkError);
  auto loop_unflagged = testing::make_edge("l", "a", "a");
  loop_unflagged.loop = false;
  CHECK_THROWS_AS(RoadNetwork::create(nodes, {loop_unflagged}, {}), NetworkError);
  CHECK_THROWS_AS(RoadNetwork::create(nodes, {testing::make_edge("e", "a", "b"), testing::make_edge("e", "b", "a")}, {}),
                  NetworkError);
}

TEST_CASE("shipped 4-node grid") {
  const auto net = load_network(testing::fixture("grid4.json"));
  CHECK(net.nodes().size() == 4);
  CHECK(net.edges().size() == 8);
  CHECK(net.districts() == std::vector<std::string>{"east", "west"});
  CHECK(net.weakly_connected());
  CHECK(net.edges()[net.edge_index("CD")].highway_class == HighwayClass::tertiary);
  CHECK(net.edges()[net.edge_index("AC")].highway_class == HighwayClass::other);
}

TEST_CASE("district adjacency is symmetrized") {
  const auto net = load_network(testing::fixture("grid4.json"));
  const auto& adj = net.district_adjacency();
  CHECK(std::find(adj.begin(), adj.end(), std::pair<std::string, std::string>{"east", "west"}) != adj.end());
  CHECK(std::find(adj.begin(), adj.end(), std::pair<std::string, std::string>{"west", "east"}) != adj.end());
}

TEST_CASE("disconnected network loads with a warning") {
  const auto before = log::warning_count();
  std::vector<Node> nodes{{"a", 0, 0}, {"b", 1, 0}, {"c", 5, 5}, {"d", 6, 5}};
  auto net = RoadNetwork::create(nodes, {testing::make_edge("ab", "a", "b"), testing::make_edge("cd", "c", "d")}, {});
  CHECK_FALSE(net.weakly_connected());
  CHECK(log::warning_count() == before + 1);
}

TEST_CASE("json round trip") {
  const auto net = load_network(testing::fixture("grid4.json"));
  const auto again = network_from_json(network_to_json(net));
  REQUIRE(again.edges().size() == net.edges().size());
  for (std::size_t i = 0; i < net.edges().size(); ++i) {
    CHECK(again.edges()[i].id == net.edges()[i].id);
    CHECK(again.edges()[i].capacity == net.edges()[i].capacity);
    CHECK(again.edges()[i].highway_class == net.edges()[i].highway_class);
    CHECK(again.edges()[i].district == net.edges()[i].district);
  }
}

TEST_CASE("edge midpoints") {
  std::vector<Node> nodes{{"p", 0, 0}, {"q", 2, 2}, {"r", 1, 0}, {"s", 5, 5}};
  std::vector<Edge> edges{testing::make_edge("pq", "p", "q"), testing::make_edge("pr", "p", "r"),
                          testing::make_edge("ss", "s", "s")};
  const auto net = RoadNetwork::create(nodes, edges, {});
  CHECK(edge_midpoint(net.edges()[0], net) == Point{1.0, 1.0});
  CHECK(edge_midpoint(net.edges()[1], net) == Point{0.5, 0.0});
  CHECK(net.edges()[2].is_loop());
  const auto dual = build_dual(net);
  CHECK(dual.size() == 2);  // loop excluded
}

TEST_CASE("line graph examples") {
  std::vector<Node> nodes{{"A", 0, 0}, {"B", 1, 0}, {"C", 2, 0}, {"D", 1, 1}};
  const auto chain = RoadNetwork::create(nodes, {testing::make_edge("AB", "A", "B"), testing::make_edge("BC", "B", "C")}, {});
  const auto directed = build_dual(chain, DualDirectedness::directed);
  REQUIRE(directed.size() == 2);
  CHECK(directed.nodes[0].edge_id == "AB");
  CHECK(directed.edges == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}});

  const auto fork = RoadNetwork::create(
      nodes, {testing::make_edge("AB", "A", "B"), testing::make_edge("BC", "B", "C"), testing::make_edge("BD", "B", "D")},
      {});
  CHECK(build_dual(fork, DualDirectedness::directed).edges ==
        std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {0, 2}});
  CHECK(build_dual(fork, DualDirectedness::symmetric).edges ==
        std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {0, 2}, {1, 0}, {2, 0}});
}

TEST_CASE("line graph matches brute-force pairwise oracle on 50 random networks") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = testing::random_network(rng, 9, 24);
    // Oracle: dual node per non-loop edge in declaration order; (a, b) iff
    // head(a) == tail(b).
    std::vector<std::size_t> kept;
    for (std::size_t e = 0; e < net.edges().size(); ++e) {
      if (!net.edges()[e].is_loop()) kept.push_back(e);
    }
    std::set<std::pair<std::uint32_t, std::uint32_t>> directed, symmetric;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = 0; j < kept.size(); ++j) {
        if (i == j) continue;
        if (net.edges()[kept[i]].to == net.edges()[kept[j]].from) {
          directed.insert({std::uint32_t(i), std::uint32_t(j)});
          symmetric.insert({std::uint32_t(i), std::uint32_t(j)});
          symmetric.insert({std::uint32_t(j), std::uint32_t(i)});
        }
      }
    }
    const auto d = build_dual(net, DualDirectedness::directed);
    const auto s = build_dual(net, DualDirectedness::symmetric);
    REQUIRE(d.size() == kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) CHECK(d.nodes[i].edge_index == kept[i]);
    CHECK(std::vector(directed.begin(), directed.end()) == d.edges);
    CHECK(std::vector(symmetric.begin(), symmetric.end()) == s.edges);
  }
}

}  // TEST_SUITE

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "policygnn/road_network.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(POLICYGNN_FIXTURES) / name; }

// Fresh empty directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("policygnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline policygnn::Edge make_edge(std::string id, std::string from, std::string to, double capacity = 1000.0,
                                 policygnn::HighwayClass cls = policygnn::HighwayClass::primary,
                                 std::optional<std::string> district = std::nullopt) {
  policygnn::Edge e;
  e.id = std::move(id);
  e.from = std::move(from);
  e.to = std::move(to);
  e.capacity = capacity;
  e.free_flow_time = 10.0;
  e.length = 100.0;
  e.highway_class = cls;
  e.district = std::move(district);
  e.loop = e.from == e.to;
  return e;
}

// Random directed multigraph on up to `max_nodes` nodes; self-loops allowed.
inline policygnn::RoadNetwork random_network(std::mt19937_64& rng, std::size_t max_nodes, std::size_t max_edges) {
  std::uniform_int_distribution<std::size_t> n_nodes(2, max_nodes);
  const std::size_t n = n_nodes(rng);
  std::vector<policygnn::Node> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({"v" + std::to_string(i), double(i), double(i * i % 7)});
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<std::size_t> n_edges(1, max_edges);
  const std::size_t m = n_edges(rng);
  std::vector<policygnn::Edge> edges;
  for (std::size_t k = 0; k < m; ++k) {
    edges.push_back(make_edge("e" + std::to_string(k), nodes[pick(rng)].id, nodes[pick(rng)].id));
  }
  return policygnn::RoadNetwork::create(std::move(nodes), std::move(edges), {});
}

}  // namespace testing

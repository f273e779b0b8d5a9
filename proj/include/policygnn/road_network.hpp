#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace policygnn {

/// Raised when a network file or in-memory network violates the schema.
class NetworkError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class HighwayClass : std::uint8_t { primary = 0, secondary = 1, tertiary = 2, other = 3 };

inline constexpr std::size_t kHighwayClassCount = 4;

/// Parses an OSM-style class name. "_link" variants fold into their parent
/// class; anything unrecognized is `other`.
HighwayClass parse_highway_class(std::string_view name);
std::string_view to_string(HighwayClass c);

/// True for the classes a capacity-reduction policy acts on.
inline bool is_higher_order(HighwayClass c) { return c != HighwayClass::other; }

struct Node {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct Edge {
  std::string id;
  std::string from;
  std::string to;
  double capacity = 0.0;        // veh/h
  double free_flow_time = 0.0;  // s
  double length = 0.0;          // m
  HighwayClass highway_class = HighwayClass::other;
  std::optional<std::string> district;
  // Self-loops must be declared explicitly; they never enter the dual graph.
  bool loop = false;

  bool is_loop() const { return loop; }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Directed road multigraph. Immutable once built through `RoadNetwork::create`
/// or `load_network`; lookups by id are O(1).
class RoadNetwork {
public:
  RoadNetwork() = default;

  /// Validates and indexes. Throws NetworkError on any invariant violation.
  static RoadNetwork create(std::vector<Node> nodes, std::vector<Edge> edges,
                            std::vector<std::pair<std::string, std::string>> district_adjacency);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Sorted, unique district ids (those referenced by edges or adjacency).
  const std::vector<std::string>& districts() const { return districts_; }
  /// Adjacency pairs, symmetric closure, sorted.
  const std::vector<std::pair<std::string, std::string>>& district_adjacency() const {
    return district_adjacency_;
  }

  std::size_t node_index(const std::string& id) const;
  std::size_t edge_index(const std::string& id) const;
  bool has_node(const std::string& id) const { return node_lookup_.contains(id); }
  bool has_edge(const std::string& id) const { return edge_lookup_.contains(id); }
  bool has_district(const std::string& id) const;

  std::size_t tail_index(std::size_t edge) const { return tails_[edge]; }
  std::size_t head_index(std::size_t edge) const { return heads_[edge]; }

  /// Whether every node is reachable from every other ignoring direction.
  bool weakly_connected() const;

  /// Copy with per-edge capacities replaced; same ids and topology.
  RoadNetwork with_capacities(const std::vector<double>& capacities) const;

private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::string> districts_;
  std::vector<std::pair<std::string, std::string>> district_adjacency_;
  std::unordered_map<std::string, std::size_t> node_lookup_;
  std::unordered_map<std::string, std::size_t> edge_lookup_;
  std::vector<std::size_t> tails_;
  std::vector<std::size_t> heads_;
};

RoadNetwork network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const RoadNetwork& net);

RoadNetwork load_network(const std::filesystem::path& path);
void save_network(const RoadNetwork& net, const std::filesystem::path& path);

Point edge_midpoint(const Edge& e, const RoadNetwork& net);

enum class DualDirectedness { directed, symmetric };

struct DualNode {
  std::string edge_id;
  std::size_t edge_index = 0;  // position in RoadNetwork::edges()
  Point midpoint;
};

/// Line graph of a road network: one node per non-loop road edge, in edge
/// declaration order. A directed dual edge (a, b) exists iff head(a) == tail(b).
/// In symmetric mode every dual edge is paired with its reversal.
struct DualGraph {
  std::vector<DualNode> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (source, target), sorted, unique
  DualDirectedness directedness = DualDirectedness::symmetric;

  std::size_t size() const { return nodes.size(); }
};

DualGraph build_dual(const RoadNetwork& net, DualDirectedness directedness = DualDirectedness::symmetric);

nlohmann::json dual_to_json(const DualGraph& dual);

}  // namespace policygnn

#include "policygnn/road_network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "policygnn/log.hpp"

namespace policygnn {

namespace {

std::string record_error(std::string_view what, std::string_view field, std::size_t index) {
  return std::string(what) + " record " + std::to_string(index) + ": field '" + std::string(field) + "'";
}

template <typename T>
T required(const nlohmann::json& rec, const char* field, std::string_view what, std::size_t index) {
  auto it = rec.find(field);
  if (it == rec.end() || it->is_null()) {
    throw NetworkError(record_error(what, field, index) + " is missing");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw NetworkError(record_error(what, field, index) + " has the wrong type");
  }
}

// Node and edge ids may be given as strings or integers.
std::string id_field(const nlohmann::json& rec, const char* field, std::string_view what, std::size_t index) {
  auto it = rec.find(field);
  if (it == rec.end() || it->is_null()) {
    throw NetworkError(record_error(what, field, index) + " is missing");
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw NetworkError(record_error(what, field, index) + " must be a string or integer");
}

}  // namespace

HighwayClass parse_highway_class(std::string_view name) {
  constexpr std::string_view link_suffix = "_link";
  if (name.size() > link_suffix.size() && name.ends_with(link_suffix)) {
    name.remove_suffix(link_suffix.size());
  }
  if (name == "primary") return HighwayClass::primary;
  if (name == "secondary") return HighwayClass::secondary;
  if (name == "tertiary") return HighwayClass::tertiary;
  return HighwayClass::other;
}

std::string_view to_string(HighwayClass c) {
  switch (c) {
    case HighwayClass::primary: return "primary";
    case HighwayClass::secondary: return "secondary";
    case HighwayClass::tertiary: return "tertiary";
    case HighwayClass::other: return "other";
  }
  return "other";
}

RoadNetwork RoadNetwork::create(std::vector<Node> nodes, std::vector<Edge> edges,
                                std::vector<std::pair<std::string, std::string>> district_adjacency) {
  RoadNetwork net;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    if (!std::isfinite(n.x) || !std::isfinite(n.y)) {
      throw NetworkError(record_error("node", "x/y", i) + " must be finite");
    }
    if (!net.node_lookup_.emplace(n.id, i).second) {
      throw NetworkError(record_error("node", "id", i) + " duplicates id '" + n.id + "'");
    }
  }

  std::set<std::string> districts;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (!net.edge_lookup_.emplace(e.id, i).second) {
      throw NetworkError(record_error("edge", "id", i) + " duplicates id '" + e.id + "'");
    }
    auto tail = net.node_lookup_.find(e.from);
    if (tail == net.node_lookup_.end()) {
      throw NetworkError(record_error("edge", "from", i) + " references missing node '" + e.from + "'");
    }
    auto head = net.node_lookup_.find(e.to);
    if (head == net.node_lookup_.end()) {
      throw NetworkError(record_error("edge", "to", i) + " references missing node '" + e.to + "'");
    }
    if (!(e.capacity > 0.0) || !std::isfinite(e.capacity)) {
      throw NetworkError(record_error("edge", "capacity", i) + " must be positive");
    }
    if (!(e.free_flow_time > 0.0) || !std::isfinite(e.free_flow_time)) {
      throw NetworkError(record_error("edge", "free_flow_time", i) + " must be positive");
    }
    if (!(e.length > 0.0) || !std::isfinite(e.length)) {
      throw NetworkError(record_error("edge", "length", i) + " must be positive");
    }
    if ((e.from == e.to) != e.loop) {
      throw NetworkError(record_error("edge", "loop", i) +
                         (e.loop ? " set but endpoints differ" : " required when from == to"));
    }
    net.tails_.push_back(tail->second);
    net.heads_.push_back(head->second);
    if (e.district) districts.insert(*e.district);
  }

  std::set<std::pair<std::string, std::string>> adjacency;
  for (std::size_t i = 0; i < district_adjacency.size(); ++i) {
    const auto& [a, b] = district_adjacency[i];
    if (a == b) {
      throw NetworkError(record_error("district_adjacency", "pair", i) + " joins a district to itself");
    }
    districts.insert(a);
    districts.insert(b);
    adjacency.emplace(a, b);
    adjacency.emplace(b, a);
  }

  net.nodes_ = std::move(nodes);
  net.edges_ = std::move(edges);
  net.districts_.assign(districts.begin(), districts.end());
  net.district_adjacency_.assign(adjacency.begin(), adjacency.end());

  if (!net.weakly_connected()) {
    log::warn("road network is not weakly connected");
  }
  return net;
}

std::size_t RoadNetwork::node_index(const std::string& id) const {
  auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) throw NetworkError("unknown node '" + id + "'");
  return it->second;
}

std::size_t RoadNetwork::edge_index(const std::string& id) const {
  auto it = edge_lookup_.find(id);
  if (it == edge_lookup_.end()) throw NetworkError("unknown edge '" + id + "'");
  return it->second;
}

bool RoadNetwork::has_district(const std::string& id) const {
  return std::binary_search(districts_.begin(), districts_.end(), id);
}

bool RoadNetwork::weakly_connected() const {
  if (nodes_.empty()) return true;
  std::vector<std::size_t> parent(nodes_.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  std::size_t components = nodes_.size();
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto a = find(tails_[e]);
    auto b = find(heads_[e]);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

RoadNetwork RoadNetwork::with_capacities(const std::vector<double>& capacities) const {
  if (capacities.size() != edges_.size()) {
    throw NetworkError("capacity vector length does not match edge count");
  }
  RoadNetwork copy = *this;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!(capacities[i] > 0.0)) {
      throw NetworkError("edge '" + edges_[i].id + "': capacity must be positive");
    }
    copy.edges_[i].capacity = capacities[i];
  }
  return copy;
}

RoadNetwork network_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw NetworkError("network document must be a JSON object");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw NetworkError("network: 'nodes' array missing");
  if (!doc.contains("edges") || !doc["edges"].is_array()) throw NetworkError("network: 'edges' array missing");

  std::vector<Node> nodes;
  const auto& jn = doc["nodes"];
  nodes.reserve(jn.size());
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const auto& rec = jn[i];
    if (!rec.is_object()) throw NetworkError("node record " + std::to_string(i) + " is not an object");
    nodes.push_back(Node{id_field(rec, "id", "node", i), required<double>(rec, "x", "node", i),
                         required<double>(rec, "y", "node", i)});
  }

  std::vector<Edge> edges;
  const auto& je = doc["edges"];
  edges.reserve(je.size());
  for (std::size_t i = 0; i < je.size(); ++i) {
    const auto& rec = je[i];
    if (!rec.is_object()) throw NetworkError("edge record " + std::to_string(i) + " is not an object");
    Edge e;
    e.id = id_field(rec, "id", "edge", i);
    e.from = id_field(rec, "from", "edge", i);
    e.to = id_field(rec, "to", "edge", i);
    e.capacity = required<double>(rec, "capacity", "edge", i);
    e.free_flow_time = required<double>(rec, "free_flow_time", "edge", i);
    e.length = required<double>(rec, "length", "edge", i);
    e.highway_class = parse_highway_class(required<std::string>(rec, "highway_class", "edge", i));
    if (auto it = rec.find("district"); it != rec.end() && !it->is_null()) {
      e.district = id_field(rec, "district", "edge", i);
    }
    if (auto it = rec.find("loop"); it != rec.end()) {
      e.loop = required<bool>(rec, "loop", "edge", i);
    }
    edges.push_back(std::move(e));
  }

  std::vector<std::pair<std::string, std::string>> adjacency;
  if (auto it = doc.find("district_adjacency"); it != doc.end()) {
    if (!it->is_array()) throw NetworkError("network: 'district_adjacency' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& pair = (*it)[i];
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
        throw NetworkError("district_adjacency record " + std::to_string(i) + " must be a pair of strings");
      }
      adjacency.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
    }
  }
  return RoadNetwork::create(std::move(nodes), std::move(edges), std::move(adjacency));
}

nlohmann::json network_to_json(const RoadNetwork& net) {
  nlohmann::json doc;
  auto& nodes = doc["nodes"] = nlohmann::json::array();
  for (const auto& n : net.nodes()) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& e : net.edges()) {
    nlohmann::json rec = {{"id", e.id},
                          {"from", e.from},
                          {"to", e.to},
                          {"capacity", e.capacity},
                          {"free_flow_time", e.free_flow_time},
                          {"length", e.length},
                          {"highway_class", to_string(e.highway_class)},
                          {"district", e.district ? nlohmann::json(*e.district) : nlohmann::json(nullptr)}};
    if (e.loop) rec["loop"] = true;
    edges.push_back(std::move(rec));
  }
  auto& adj = doc["district_adjacency"] = nlohmann::json::array();
  for (const auto& [a, b] : net.district_adjacency()) {
    if (a < b) adj.push_back({a, b});
  }
  return doc;
}

RoadNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open network file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw NetworkError(path.string() + ": " + e.what());
  }
  return network_from_json(doc);
}

void save_network(const RoadNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw NetworkError("cannot write network file " + path.string());
  out << network_to_json(net).dump(1) << '\n';
}

Point edge_midpoint(const Edge& e, const RoadNetwork& net) {
  const Node& a = net.nodes()[net.node_index(e.from)];
  const Node& b = net.nodes()[net.node_index(e.to)];
  return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
}

DualGraph build_dual(const RoadNetwork& net, DualDirectedness directedness) {
  DualGraph dual;
  dual.directedness = directedness;

  const auto& edges = net.edges();
  std::vector<std::int64_t> dual_of_edge(edges.size(), -1);
  std::size_t loops = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].is_loop()) {
      ++loops;
      continue;
    }
    dual_of_edge[i] = static_cast<std::int64_t>(dual.nodes.size());
    dual.nodes.push_back(DualNode{edges[i].id, i, edge_midpoint(edges[i], net)});
  }
  if (loops > 0) log::warn("build_dual: skipped " + std::to_string(loops) + " loop edge(s)");

  // Out-edges per node, so each dual node only visits edges leaving its head.
  std::vector<std::vector<std::uint32_t>> leaving(net.nodes().size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (dual_of_edge[i] >= 0) leaving[net.tail_index(i)].push_back(static_cast<std::uint32_t>(dual_of_edge[i]));
  }

  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (dual_of_edge[i] < 0) continue;
    const auto src = static_cast<std::uint32_t>(dual_of_edge[i]);
    for (std::uint32_t dst : leaving[net.head_index(i)]) {
      dual.edges.emplace_back(src, dst);
      if (directedness == DualDirectedness::symmetric) dual.edges.emplace_back(dst, src);
    }
  }
  std::sort(dual.edges.begin(), dual.edges.end());
  dual.edges.erase(std::unique(dual.edges.begin(), dual.edges.end()), dual.edges.end());
  return dual;
}

nlohmann::json dual_to_json(const DualGraph& dual) {
  nlohmann::json doc;
  doc["directedness"] = dual.directedness == DualDirectedness::symmetric ? "symmetric" : "directed";
  auto& nodes = doc["nodes"] = nlohmann::json::array();
  for (const auto& n : dual.nodes) {
    nodes.push_back({{"edge_id", n.edge_id}, {"x", n.midpoint.x}, {"y", n.midpoint.y}});
  }
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : dual.edges) edges.push_back({a, b});
  return doc;
}

}  // namespace policygnn

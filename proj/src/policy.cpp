#include "policygnn/policy.hpp"

#include <algorithm>

namespace policygnn {

namespace {
void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}
}  // namespace

std::string scenario_id_for(std::vector<std::string> districts) {
  sort_unique(districts);
  std::string id;
  for (const auto& d : districts) {
    if (!id.empty()) id += '+';
    id += d;
  }
  return id;
}

std::vector<double> reduction_per_edge(const RoadNetwork& net, const PolicyScenario& scenario) {
  if (!(scenario.reduction >= 0.0 && scenario.reduction <= 1.0)) {
    throw PolicyError("reduction must lie in [0, 1]");
  }
  for (const auto& d : scenario.districts) {
    if (!net.has_district(d)) throw PolicyError("unknown district '" + d + "'");
  }
  std::vector<std::string> selected = scenario.districts;
  sort_unique(selected);
  std::vector<double> out(net.edges().size(), 0.0);
  const auto& edges = net.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (!e.district || !is_higher_order(e.highway_class)) continue;
    if (std::binary_search(selected.begin(), selected.end(), *e.district)) {
      out[i] = scenario.reduction;
    }
  }
  for (const auto& id : scenario.edges) {
    if (!net.has_edge(id)) throw PolicyError("unknown edge '" + id + "'");
    out[net.edge_index(id)] = scenario.reduction;
  }
  return out;
}

nlohmann::json scenario_to_json(const PolicyScenario& s) {
  nlohmann::json j = {{"id", s.id}, {"districts", s.districts}, {"reduction", s.reduction}};
  if (!s.edges.empty()) j["edges"] = s.edges;
  return j;
}

PolicyScenario scenario_from_json(const nlohmann::json& j) {
  PolicyScenario s;
  try {
    s.districts = j.value("districts", std::vector<std::string>{});
    s.edges = j.value("edges", std::vector<std::string>{});
    s.reduction = j.value("reduction", 0.5);
    sort_unique(s.districts);
    sort_unique(s.edges);
    s.id = j.contains("id") ? j.at("id").get<std::string>() : scenario_id_for(s.districts);
  } catch (const nlohmann::json::exception& e) {
    throw PolicyError(std::string("malformed scenario: ") + e.what());
  }
  if (!(s.reduction >= 0.0 && s.reduction <= 1.0)) throw PolicyError("reduction must lie in [0, 1]");
  return s;
}

}  // namespace policygnn

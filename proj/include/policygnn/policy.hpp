#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/road_network.hpp"

namespace policygnn {

class PolicyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A capacity-reduction policy. District selections reduce only higher-order
/// roads (primary/secondary/tertiary) inside the selected districts; explicitly
/// listed edges are reduced regardless of class.
struct PolicyScenario {
  std::string id;
  std::vector<std::string> districts;  // sorted, unique
  std::vector<std::string> edges;      // explicit edge ids, sorted, unique
  double reduction = 0.5;
  std::optional<std::vector<double>> labels;  // y_e = v_e - b_e once simulated

  bool empty() const { return districts.empty() && edges.empty(); }
};

/// Canonical id: sorted district ids joined by '+'.
std::string scenario_id_for(std::vector<std::string> districts);

/// Fraction of capacity removed from each edge (0 where untouched). Throws
/// PolicyError for unknown districts or edges, or a reduction outside [0, 1].
std::vector<double> reduction_per_edge(const RoadNetwork& net, const PolicyScenario& scenario);

nlohmann::json scenario_to_json(const PolicyScenario& s);
PolicyScenario scenario_from_json(const nlohmann::json& j);

}  // namespace policygnn

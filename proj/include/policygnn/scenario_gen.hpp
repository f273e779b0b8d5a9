#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/policy.hpp"
#include "policygnn/road_network.hpp"

namespace policygnn {

class ScenarioError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// District adjacency as bitmasks over at most kMaxDistricts vertices.
/// Vertex i corresponds to ids[i]; ids are sorted.
class DistrictGraph {
public:
  static constexpr std::size_t kMaxDistricts = 25;

  DistrictGraph(std::vector<std::string> ids, const std::vector<std::pair<std::string, std::string>>& adjacency);
  static DistrictGraph from_network(const RoadNetwork& net);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::uint32_t neighbors(std::size_t v) const { return neighbors_[v]; }

  std::vector<std::string> members(std::uint32_t mask) const;

private:
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> neighbors_;
};

/// Canonical subset order: by size, then lexicographically by sorted vertex list.
bool canonical_less(std::uint32_t a, std::uint32_t b);

/// Visits every nonempty connected vertex subset exactly once (in discovery
/// order, not canonical). Returns the count.
std::uint64_t for_each_connected_subset(const DistrictGraph& g, const std::function<void(std::uint32_t)>& visit);

/// All connected subsets, sorted canonically.
std::vector<std::uint32_t> enumerate_connected_subsets(const DistrictGraph& g);

/// `n` distinct connected subsets drawn uniformly without replacement, plus all
/// singletons when requested (deduplicated). Result sorted canonically.
std::vector<PolicyScenario> sample_scenarios(const DistrictGraph& g, std::size_t n, std::uint64_t seed,
                                             bool include_singletons, double reduction = 0.5);

struct ScenarioSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// Seeded permutation followed by a contiguous cut. Validation and test sizes
/// are floor(ratio * n); the remainder goes to train.
ScenarioSplit split_scenarios(const std::vector<std::string>& scenario_ids, std::array<double, 3> ratios,
                              std::uint64_t seed);

nlohmann::json split_manifest(const ScenarioSplit& split, std::uint64_t seed,
                              const std::vector<PolicyScenario>& scenarios);
ScenarioSplit split_from_json(const nlohmann::json& j);

std::vector<PolicyScenario> load_scenarios(const std::filesystem::path& path);
void save_scenarios(const std::vector<PolicyScenario>& scenarios, const std::filesystem::path& path);

}  // namespace policygnn

#include "policygnn/scenario_gen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace policygnn {

DistrictGraph::DistrictGraph(std::vector<std::string> ids,
                             const std::vector<std::pair<std::string, std::string>>& adjacency) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() > kMaxDistricts) {
    throw ScenarioError("district graph has " + std::to_string(ids.size()) + " districts; limit is " +
                        std::to_string(kMaxDistricts));
  }
  ids_ = std::move(ids);
  neighbors_.assign(ids_.size(), 0);
  auto index = [&](const std::string& id) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) throw ScenarioError("adjacency references unknown district '" + id + "'");
    return static_cast<std::size_t>(it - ids_.begin());
  };
  for (const auto& [a, b] : adjacency) {
    const auto i = index(a);
    const auto j = index(b);
    if (i == j) continue;
    neighbors_[i] |= 1u << j;
    neighbors_[j] |= 1u << i;
  }
}

DistrictGraph DistrictGraph::from_network(const RoadNetwork& net) {
  return DistrictGraph(net.districts(), net.district_adjacency());
}

std::vector<std::string> DistrictGraph::members(std::uint32_t mask) const {
  std::vector<std::string> out;
  for (std::size_t v = 0; v < ids_.size(); ++v) {
    if (mask & (1u << v)) out.push_back(ids_[v]);
  }
  return out;
}

bool canonical_less(std::uint32_t a, std::uint32_t b) {
  const int pa = std::popcount(a);
  const int pb = std::popcount(b);
  if (pa != pb) return pa < pb;
  // Same size: compare sorted index lists lexicographically. The first
  // differing position is the lowest bit where the masks differ.
  const std::uint32_t diff = a ^ b;
  if (diff == 0) return false;
  const std::uint32_t low = diff & (~diff + 1);
  return (a & low) != 0;
}

namespace {

// Extension step: `current` is connected; `candidates` are vertices adjacent to
// it that may still be added; `forbidden` can never be added in this branch.
// Each connected set is produced exactly once because every branch fixes, for
// each candidate it skips, that the candidate stays out.
std::uint64_t extend(const DistrictGraph& g, std::uint32_t current, std::uint32_t candidates, std::uint32_t forbidden,
                     const std::function<void(std::uint32_t)>& visit) {
  visit(current);
  std::uint64_t count = 1;
  while (candidates) {
    const int v = std::countr_zero(candidates);
    const std::uint32_t bit = 1u << v;
    candidates &= ~bit;
    const std::uint32_t next = current | bit;
    const std::uint32_t next_forbidden = forbidden | bit;
    const std::uint32_t next_candidates = (candidates | g.neighbors(static_cast<std::size_t>(v))) & ~next & ~forbidden;
    count += extend(g, next, next_candidates & ~(forbidden), next_forbidden | next, visit);
    forbidden = next_forbidden;
  }
  return count;
}

}  // namespace

std::uint64_t for_each_connected_subset(const DistrictGraph& g, const std::function<void(std::uint32_t)>& visit) {
  std::uint64_t count = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::uint32_t bit = 1u << v;
    const std::uint32_t lower = bit - 1;  // vertices below v are owned by earlier roots
    const std::uint32_t forbidden = lower | bit;
    count += extend(g, bit, g.neighbors(v) & ~forbidden, forbidden, visit);
  }
  return count;
}

std::vector<std::uint32_t> enumerate_connected_subsets(const DistrictGraph& g) {
  std::vector<std::uint32_t> out;
  for_each_connected_subset(g, [&](std::uint32_t m) { out.push_back(m); });
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

std::vector<PolicyScenario> sample_scenarios(const DistrictGraph& g, std::size_t n, std::uint64_t seed,
                                             bool include_singletons, double reduction) {
  auto all = enumerate_connected_subsets(g);
  if (n > all.size()) {
    throw ScenarioError("requested " + std::to_string(n) + " scenarios but only " + std::to_string(all.size()) +
                        " connected subsets exist");
  }
  // Partial Fisher-Yates over the canonical list.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  std::vector<std::uint32_t> chosen(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  if (include_singletons) {
    for (std::size_t v = 0; v < g.size(); ++v) chosen.push_back(1u << v);
  }
  std::sort(chosen.begin(), chosen.end(), canonical_less);
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());

  std::vector<PolicyScenario> out;
  out.reserve(chosen.size());
  for (std::uint32_t m : chosen) {
    PolicyScenario s;
    s.districts = g.members(m);
    s.id = scenario_id_for(s.districts);
    s.reduction = reduction;
    out.push_back(std::move(s));
  }
  return out;
}

ScenarioSplit split_scenarios(const std::vector<std::string>& scenario_ids, std::array<double, 3> ratios,
                              std::uint64_t seed) {
  if (scenario_ids.size() < 3) throw ScenarioError("need at least 3 scenarios to split");
  for (double r : ratios) {
    if (r < 0.0) throw ScenarioError("split ratios must be nonnegative");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ScenarioError("split ratios must sum to 1");

  std::vector<std::string> order = scenario_ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(order.size());
  // The epsilon keeps products such as 0.15 * 20 = 3.0000000000000004 and
  // 0.29 * 100 = 28.999999999999996 on the intended side of the floor.
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * n + 1e-9));
  const std::size_t n_train = order.size() - n_val - n_test;

  ScenarioSplit split;
  auto it = order.begin();
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  split.validation.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  split.test.assign(it, order.end());
  return split;
}

nlohmann::json split_manifest(const ScenarioSplit& split, std::uint64_t seed,
                              const std::vector<PolicyScenario>& scenarios) {
  double size_sum = 0.0;
  for (const auto& s : scenarios) size_sum += static_cast<double>(s.districts.size());
  const double mean_size = scenarios.empty() ? 0.0 : size_sum / static_cast<double>(scenarios.size());
  return {{"seed", seed},
          {"train", split.train},
          {"validation", split.validation},
          {"test", split.test},
          {"summary", {{"count", scenarios.size()}, {"mean_subset_size", mean_size}}}};
}

ScenarioSplit split_from_json(const nlohmann::json& j) {
  try {
    return {j.at("train").get<std::vector<std::string>>(), j.at("validation").get<std::vector<std::string>>(),
            j.at("test").get<std::vector<std::string>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed split manifest: ") + e.what());
  }
}

std::vector<PolicyScenario> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (!j.is_array()) throw ScenarioError(path.string() + ": expected an array of scenarios");
  std::vector<PolicyScenario> out;
  for (const auto& rec : j) out.push_back(scenario_from_json(rec));
  return out;
}

void save_scenarios(const std::vector<PolicyScenario>& scenarios, const std::filesystem::path& path) {
  auto j = nlohmann::json::array();
  for (const auto& s : scenarios) j.push_back(scenario_to_json(s));
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace policygnn

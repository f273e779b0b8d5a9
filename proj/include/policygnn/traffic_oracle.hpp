#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/policy.hpp"
#include "policygnn/road_network.hpp"

namespace policygnn {

class OracleError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct OdDemand {
  std::string origin;
  std::string destination;
  double demand = 0.0;    // veh/h, both modes
  double alt_cost = 0.0;  // s, generalized cost of the non-car alternative
};

/// Link travel time as a function of volume.
///   affine: t = a_e + b_e * v, with per-edge coefficients; when none are given,
///           a_e = free_flow_time and b_e = slope * free_flow_time / capacity.
///   bpr:    t = free_flow_time * (1 + alpha * (v / capacity)^beta)
struct CostFunction {
  enum class Kind { affine, bpr };
  Kind kind = Kind::bpr;
  double alpha = 0.15;
  double beta = 4.0;
  double slope = 1.0;
  std::vector<double> affine_a;
  std::vector<double> affine_b;

  static CostFunction bpr(double alpha = 0.15, double beta = 4.0);
  static CostFunction affine(std::vector<double> a, std::vector<double> b);

  double travel_time(const Edge& e, std::size_t edge_index, double volume) const;
};

struct OracleConfig {
  int max_iter = 500;
  double gap_tol = 1e-4;
  bool mode_choice = true;         // false: all demand travels by car
  bool freeze_mode_split = false;  // true: split fixed from free-flow costs
  double mode_logit_scale = 0.01;  // 1/s
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;        // lognormal sigma of per-OD demand factors
  CostFunction cost;
};

struct AssignmentResult {
  std::vector<double> volume;          // veh/h per edge, declaration order
  double relative_gap = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> car_share;       // per OD pair, input order
  std::vector<double> car_demand;      // veh/h loaded per OD pair
  std::vector<std::pair<int, double>> gap_checkpoints;  // (iteration, gap) at powers of two
};

/// Binary logit share of the car mode; stable for large cost differences.
double logit_car_share(double car_cost, double alt_cost, double scale);

/// Static equilibrium by successive averages (step 1/k) over an all-or-nothing
/// shortest-path loading, with a logit car-vs-alternative split recomputed from
/// current OD costs each iteration. Deterministic for a fixed seed.
AssignmentResult assign(const RoadNetwork& net, const std::vector<OdDemand>& demand, const OracleConfig& config);

/// Copy of `net` with capacities scaled by (1 - reduction) on affected edges.
/// A full closure (reduction 1) keeps a residual 1e-6 of the capacity.
RoadNetwork apply_policy(const RoadNetwork& net, const PolicyScenario& scenario);

/// Mean volume over seeds 0..n_seeds-1 (config.seed is ignored).
std::vector<double> base_volume(const RoadNetwork& net, const std::vector<OdDemand>& demand, OracleConfig config,
                                int n_seeds);

std::vector<OdDemand> demand_from_json(const nlohmann::json& j);
nlohmann::json demand_to_json(const std::vector<OdDemand>& demand);
std::vector<OdDemand> load_demand(const std::filesystem::path& path);

OracleConfig oracle_config_from_json(const nlohmann::json& j);
nlohmann::json oracle_config_to_json(const OracleConfig& c);

/// Per-edge volume CSV: header "edge_id,volume", one row per edge, values
/// printed with round-trip precision.
void write_volume_csv(const std::filesystem::path& path, const RoadNetwork& net, const std::vector<double>& volume);
std::vector<double> read_volume_csv(const std::filesystem::path& path, const RoadNetwork& net);

/// Stable 64-bit seed derived from a scenario id.
std::uint64_t scenario_seed(const std::string& scenario_id, std::uint64_t base_seed);

}  // namespace policygnn

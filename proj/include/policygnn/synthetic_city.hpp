#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "policygnn/road_network.hpp"
#include "policygnn/traffic_oracle.hpp"

namespace policygnn {

/// Parameters for a rectangular street grid partitioned into rectangular
/// districts. Every grid line carries a road class; both directions of each
/// street segment are separate edges.
struct CityConfig {
  std::size_t columns = 15;  // nodes per row
  std::size_t rows = 12;     // nodes per column
  double spacing = 250.0;    // m between adjacent nodes
  std::size_t district_columns = 5;
  std::size_t district_rows = 4;
  std::size_t zones_per_district = 2;  // demand centroids per district
  double trips_per_zone = 450.0;       // veh/h produced by each zone, split over destinations
  double distance_decay = 1.0 / 2500.0;  // 1/m, gravity deterrence
  double alt_cost_factor = 1.4;        // alternative mode: factor * free-flow car time + alt_cost_offset
  double alt_cost_offset = 240.0;      // s
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static CityConfig from_json(const nlohmann::json& j);
};

struct City {
  RoadNetwork network;
  std::vector<OdDemand> demand;
};

City generate_city(const CityConfig& config);

}  // namespace policygnn

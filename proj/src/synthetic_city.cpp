#include "policygnn/synthetic_city.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace policygnn {

nlohmann::json CityConfig::to_json() const {
  return {{"columns", columns},
          {"rows", rows},
          {"spacing", spacing},
          {"district_columns", district_columns},
          {"district_rows", district_rows},
          {"zones_per_district", zones_per_district},
          {"trips_per_zone", trips_per_zone},
          {"distance_decay", distance_decay},
          {"alt_cost_factor", alt_cost_factor},
          {"alt_cost_offset", alt_cost_offset},
          {"seed", seed}};
}

CityConfig CityConfig::from_json(const nlohmann::json& j) {
  CityConfig c;
  c.columns = j.value("columns", c.columns);
  c.rows = j.value("rows", c.rows);
  c.spacing = j.value("spacing", c.spacing);
  c.district_columns = j.value("district_columns", c.district_columns);
  c.district_rows = j.value("district_rows", c.district_rows);
  c.zones_per_district = j.value("zones_per_district", c.zones_per_district);
  c.trips_per_zone = j.value("trips_per_zone", c.trips_per_zone);
  c.distance_decay = j.value("distance_decay", c.distance_decay);
  c.alt_cost_factor = j.value("alt_cost_factor", c.alt_cost_factor);
  c.alt_cost_offset = j.value("alt_cost_offset", c.alt_cost_offset);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

struct ClassSpec {
  HighwayClass cls;
  double capacity;  // veh/h
  double speed;     // m/s
};

ClassSpec line_class(std::size_t i, std::size_t n) {
  if (i == n / 4 || i == (3 * n) / 4) return {HighwayClass::primary, 1800.0, 50.0 / 3.6};
  if (i % 6 == 0) return {HighwayClass::secondary, 1200.0, 40.0 / 3.6};
  if (i % 6 == 2) return {HighwayClass::tertiary, 900.0, 35.0 / 3.6};
  return {HighwayClass::other, 600.0, 30.0 / 3.6};
}

std::string node_id(std::size_t r, std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "n%02zu_%02zu", r, c);
  return buf;
}

std::string district_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "D%02zu", index + 1);
  return buf;
}

}  // namespace

City generate_city(const CityConfig& cfg) {
  if (cfg.columns < 2 || cfg.rows < 2) throw NetworkError("city grid needs at least 2x2 nodes");
  if (cfg.district_columns == 0 || cfg.district_rows == 0 || cfg.district_columns > cfg.columns ||
      cfg.district_rows > cfg.rows) {
    throw NetworkError("district grid does not fit the street grid");
  }
  const double block_w = static_cast<double>(cfg.columns) / static_cast<double>(cfg.district_columns);
  const double block_h = static_cast<double>(cfg.rows) / static_cast<double>(cfg.district_rows);
  auto district_at = [&](double r, double c) {
    const auto dc = std::min(cfg.district_columns - 1, static_cast<std::size_t>((c + 0.5) / block_w));
    const auto dr = std::min(cfg.district_rows - 1, static_cast<std::size_t>((r + 0.5) / block_h));
    return dr * cfg.district_columns + dc;
  };

  std::vector<Node> nodes;
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.columns; ++c) {
      nodes.push_back({node_id(r, c), static_cast<double>(c) * cfg.spacing, static_cast<double>(r) * cfg.spacing});
    }
  }

  std::vector<Edge> edges;
  auto add_street = [&](std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2, const ClassSpec& spec) {
    const std::string d = district_id(district_at(0.5 * static_cast<double>(r1 + r2), 0.5 * static_cast<double>(c1 + c2)));
    for (int dir = 0; dir < 2; ++dir) {
      Edge e;
      e.from = dir == 0 ? node_id(r1, c1) : node_id(r2, c2);
      e.to = dir == 0 ? node_id(r2, c2) : node_id(r1, c1);
      e.id = e.from + ">" + e.to;
      e.length = cfg.spacing;
      e.capacity = spec.capacity;
      e.free_flow_time = cfg.spacing / spec.speed;
      e.highway_class = spec.cls;
      e.district = d;
      edges.push_back(std::move(e));
    }
  };
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c + 1 < cfg.columns; ++c) add_street(r, c, r, c + 1, line_class(r, cfg.rows));
  }
  for (std::size_t c = 0; c < cfg.columns; ++c) {
    for (std::size_t r = 0; r + 1 < cfg.rows; ++r) add_street(r, c, r + 1, c, line_class(c, cfg.columns));
  }

  std::vector<std::pair<std::string, std::string>> adjacency;
  for (std::size_t dr = 0; dr < cfg.district_rows; ++dr) {
    for (std::size_t dc = 0; dc < cfg.district_columns; ++dc) {
      const auto here = dr * cfg.district_columns + dc;
      if (dc + 1 < cfg.district_columns) adjacency.emplace_back(district_id(here), district_id(here + 1));
      if (dr + 1 < cfg.district_rows) adjacency.emplace_back(district_id(here), district_id(here + cfg.district_columns));
    }
  }

  // Demand centroids: distinct random nodes inside each district block.
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::pair<std::size_t, std::size_t>> zones;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> members(cfg.district_columns * cfg.district_rows);
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.columns; ++c) {
      members[district_at(static_cast<double>(r), static_cast<double>(c))].emplace_back(r, c);
    }
  }
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t k = 0; k < std::min(cfg.zones_per_district, m.size()); ++k) zones.push_back(m[k]);
  }

  std::uniform_real_distribution<double> jitter(0.7, 1.3);
  std::vector<OdDemand> demand;
  for (std::size_t o = 0; o < zones.size(); ++o) {
    std::vector<double> weight(zones.size(), 0.0);
    std::vector<double> dist(zones.size(), 0.0);
    double total = 0.0;
    for (std::size_t d = 0; d < zones.size(); ++d) {
      if (d == o) continue;
      dist[d] = cfg.spacing * (std::abs(static_cast<double>(zones[o].first) - static_cast<double>(zones[d].first)) +
                               std::abs(static_cast<double>(zones[o].second) - static_cast<double>(zones[d].second)));
      weight[d] = std::exp(-cfg.distance_decay * dist[d]);
      total += weight[d];
    }
    const double production = cfg.trips_per_zone * jitter(rng);
    for (std::size_t d = 0; d < zones.size(); ++d) {
      if (d == o || weight[d] == 0.0) continue;
      const double free_flow_car = dist[d] / (35.0 / 3.6);
      demand.push_back({node_id(zones[o].first, zones[o].second), node_id(zones[d].first, zones[d].second),
                        production * weight[d] / total, cfg.alt_cost_factor * free_flow_car + cfg.alt_cost_offset});
    }
  }

  return {RoadNetwork::create(std::move(nodes), std::move(edges), std::move(adjacency)), std::move(demand)};
}

}  // namespace policygnn

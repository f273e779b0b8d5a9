#include "policygnn/traffic_oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <sstream>

namespace policygnn {

CostFunction CostFunction::bpr(double alpha, double beta) {
  CostFunction c;
  c.kind = Kind::bpr;
  c.alpha = alpha;
  c.beta = beta;
  return c;
}

CostFunction CostFunction::affine(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size()) throw OracleError("affine cost: coefficient vectors differ in length");
  CostFunction c;
  c.kind = Kind::affine;
  c.affine_a = std::move(a);
  c.affine_b = std::move(b);
  return c;
}

double CostFunction::travel_time(const Edge& e, std::size_t edge_index, double volume) const {
  if (kind == Kind::bpr) {
    return e.free_flow_time * (1.0 + alpha * std::pow(volume / e.capacity, beta));
  }
  if (!affine_a.empty()) return affine_a[edge_index] + affine_b[edge_index] * volume;
  return e.free_flow_time * (1.0 + slope * volume / e.capacity);
}

double logit_car_share(double car_cost, double alt_cost, double scale) {
  const double z = scale * (car_cost - alt_cost);
  if (z >= 0.0) {
    const double ez = std::exp(-z);
    return ez / (1.0 + ez);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct OdIndex {
  std::size_t origin;
  std::size_t destination;
};

// One-to-all shortest paths with predecessor edges. Ties resolve to the first
// relaxation in edge declaration order.
class ShortestPaths {
public:
  explicit ShortestPaths(const RoadNetwork& net) : net_(net), out_(net.nodes().size()) {
    for (std::size_t e = 0; e < net.edges().size(); ++e) {
      if (!net.edges()[e].is_loop()) out_[net.tail_index(e)].push_back(e);
    }
    dist_.resize(net.nodes().size());
    pred_.resize(net.nodes().size());
  }

  void run(std::size_t origin, const std::vector<double>& cost) {
    std::fill(dist_.begin(), dist_.end(), kInf);
    std::fill(pred_.begin(), pred_.end(), kNone);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist_[origin] = 0.0;
    heap.emplace(0.0, origin);
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist_[u]) continue;
      for (std::size_t e : out_[u]) {
        const std::size_t v = net_.head_index(e);
        const double nd = d + cost[e];
        if (nd < dist_[v]) {
          dist_[v] = nd;
          pred_[v] = e;
          heap.emplace(nd, v);
        }
      }
    }
  }

  double distance(std::size_t node) const { return dist_[node]; }

  void load(std::size_t origin, std::size_t destination, double flow, std::vector<double>& volume) const {
    std::size_t v = destination;
    while (v != origin) {
      const std::size_t e = pred_[v];
      volume[e] += flow;
      v = net_.tail_index(e);
    }
  }

private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const RoadNetwork& net_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<double> dist_;
  std::vector<std::size_t> pred_;
};

}  // namespace

AssignmentResult assign(const RoadNetwork& net, const std::vector<OdDemand>& demand, const OracleConfig& config) {
  if (config.max_iter < 1) throw OracleError("max_iter must be at least 1");
  if (config.mode_logit_scale < 0.0) throw OracleError("mode_logit_scale must be nonnegative");
  if (config.noise_sigma < 0.0) throw OracleError("noise_sigma must be nonnegative");
  const auto& edges = net.edges();
  if (config.cost.kind == CostFunction::Kind::affine && !config.cost.affine_a.empty() &&
      config.cost.affine_a.size() != edges.size()) {
    throw OracleError("affine cost coefficients do not match edge count");
  }

  std::vector<OdIndex> od(demand.size());
  std::vector<double> total(demand.size());
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < demand.size(); ++k) {
    const auto& d = demand[k];
    if (!(d.demand >= 0.0)) throw OracleError("OD " + d.origin + "->" + d.destination + ": negative demand");
    if (d.origin == d.destination) throw OracleError("OD " + d.origin + "->" + d.destination + ": origin equals destination");
    if (!net.has_node(d.origin) || !net.has_node(d.destination)) {
      throw OracleError("OD " + d.origin + "->" + d.destination + ": unknown node");
    }
    od[k] = {net.node_index(d.origin), net.node_index(d.destination)};
    // Draw for every pair, even at sigma 0, so the stream does not depend on sigma.
    const double z = normal(rng);
    total[k] = d.demand * std::exp(config.noise_sigma * z);
  }

  // Group OD pairs by origin so each iteration runs one tree per origin.
  std::map<std::size_t, std::vector<std::size_t>> by_origin;
  for (std::size_t k = 0; k < od.size(); ++k) by_origin[od[k].origin].push_back(k);

  ShortestPaths sp(net);
  std::vector<double> volume(edges.size(), 0.0);
  std::vector<double> cost(edges.size());
  std::vector<double> od_cost(od.size());
  std::vector<double> car(od.size(), 0.0);   // averaged car demand consistent with `volume`
  std::vector<double> frozen_share;
  std::vector<double> aon(edges.size());

  auto update_costs = [&] {
    for (std::size_t e = 0; e < edges.size(); ++e) cost[e] = config.cost.travel_time(edges[e], e, volume[e]);
  };
  auto shortest_costs = [&] {
    for (const auto& [origin, pairs] : by_origin) {
      sp.run(origin, cost);
      for (std::size_t k : pairs) {
        const double c = sp.distance(od[k].destination);
        if (!std::isfinite(c)) {
          throw OracleError("unreachable OD pair '" + demand[k].origin + "' -> '" + demand[k].destination + "'");
        }
        od_cost[k] = c;
      }
    }
  };
  auto target_car = [&](std::size_t k) {
    if (!config.mode_choice) return total[k];
    if (config.freeze_mode_split) return total[k] * frozen_share[k];
    return total[k] * logit_car_share(od_cost[k], demand[k].alt_cost, config.mode_logit_scale);
  };

  AssignmentResult result;
  update_costs();
  shortest_costs();
  if (config.freeze_mode_split) {
    frozen_share.resize(od.size());
    for (std::size_t k = 0; k < od.size(); ++k) {
      frozen_share[k] = logit_car_share(od_cost[k], demand[k].alt_cost, config.mode_logit_scale);
    }
  }

  int next_checkpoint = 1;
  double gap = kInf;
  int k = 0;
  while (true) {
    // Gap of the current averaged state: route part plus mode-split part.
    if (k > 0) {
      double tstt = 0.0;
      for (std::size_t e = 0; e < edges.size(); ++e) tstt += volume[e] * cost[e];
      double sptt = 0.0;
      double mode_dev = 0.0;
      double demand_sum = 0.0;
      for (std::size_t i = 0; i < od.size(); ++i) {
        sptt += car[i] * od_cost[i];
        mode_dev += std::abs(car[i] - target_car(i));
        demand_sum += total[i];
      }
      const double route_gap = tstt > 0.0 ? std::max(0.0, tstt - sptt) / tstt : 0.0;
      gap = route_gap + (demand_sum > 0.0 ? mode_dev / demand_sum : 0.0);
      if (k == next_checkpoint) {
        result.gap_checkpoints.emplace_back(k, gap);
        next_checkpoint *= 2;
      }
      if (gap < config.gap_tol || k >= config.max_iter) break;
    }

    ++k;
    std::fill(aon.begin(), aon.end(), 0.0);
    const double step = 1.0 / static_cast<double>(k);
    for (const auto& [origin, pairs] : by_origin) {
      sp.run(origin, cost);
      for (std::size_t i : pairs) {
        const double q = target_car(i);
        sp.load(origin, od[i].destination, q, aon);
        car[i] += step * (q - car[i]);
      }
    }
    for (std::size_t e = 0; e < edges.size(); ++e) volume[e] += step * (aon[e] - volume[e]);
    update_costs();
    shortest_costs();
  }

  result.volume = std::move(volume);
  result.relative_gap = gap;
  result.iterations = k;
  result.converged = gap < config.gap_tol;
  result.car_demand = car;
  result.car_share.resize(od.size());
  for (std::size_t i = 0; i < od.size(); ++i) result.car_share[i] = total[i] > 0.0 ? car[i] / total[i] : 0.0;
  return result;
}

RoadNetwork apply_policy(const RoadNetwork& net, const PolicyScenario& scenario) {
  const auto reduction = reduction_per_edge(net, scenario);
  std::vector<double> capacity(net.edges().size());
  for (std::size_t i = 0; i < capacity.size(); ++i) {
    const double c = net.edges()[i].capacity;
    capacity[i] = reduction[i] == 0.0 ? c : std::max(c * (1.0 - reduction[i]), 1e-6 * c);
  }
  return net.with_capacities(capacity);
}

std::vector<double> base_volume(const RoadNetwork& net, const std::vector<OdDemand>& demand, OracleConfig config,
                                int n_seeds) {
  if (n_seeds < 1) throw OracleError("n_seeds must be at least 1");
  std::vector<double> sum(net.edges().size(), 0.0);
  for (int s = 0; s < n_seeds; ++s) {
    config.seed = static_cast<std::uint64_t>(s);
    const auto r = assign(net, demand, config);
    for (std::size_t e = 0; e < sum.size(); ++e) sum[e] += r.volume[e];
  }
  for (double& v : sum) v /= static_cast<double>(n_seeds);
  return sum;
}

std::vector<OdDemand> demand_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw OracleError("demand document must be an array");
  std::vector<OdDemand> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      const auto& r = j[i];
      out.push_back({r.at("origin").get<std::string>(), r.at("destination").get<std::string>(),
                     r.at("demand").get<double>(), r.at("alt_cost").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw OracleError("demand record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::json demand_to_json(const std::vector<OdDemand>& demand) {
  auto j = nlohmann::json::array();
  for (const auto& d : demand) {
    j.push_back({{"origin", d.origin}, {"destination", d.destination}, {"demand", d.demand}, {"alt_cost", d.alt_cost}});
  }
  return j;
}

std::vector<OdDemand> load_demand(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw OracleError("cannot open demand file " + path.string());
  return demand_from_json(nlohmann::json::parse(in));
}

OracleConfig oracle_config_from_json(const nlohmann::json& j) {
  OracleConfig c;
  c.max_iter = j.value("max_iter", c.max_iter);
  c.gap_tol = j.value("gap_tol", c.gap_tol);
  c.mode_choice = j.value("mode_choice", c.mode_choice);
  c.freeze_mode_split = j.value("freeze_mode_split", c.freeze_mode_split);
  c.mode_logit_scale = j.value("mode_logit_scale", c.mode_logit_scale);
  c.seed = j.value("seed", c.seed);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  if (auto it = j.find("cost"); it != j.end()) {
    const std::string kind = it->value("kind", "bpr");
    if (kind == "bpr") {
      c.cost = CostFunction::bpr(it->value("alpha", 0.15), it->value("beta", 4.0));
    } else if (kind == "affine") {
      c.cost = CostFunction::affine(it->value("a", std::vector<double>{}), it->value("b", std::vector<double>{}));
      c.cost.slope = it->value("slope", 1.0);
    } else {
      throw OracleError("unknown cost kind '" + kind + "'");
    }
  }
  return c;
}

nlohmann::json oracle_config_to_json(const OracleConfig& c) {
  nlohmann::json cost;
  if (c.cost.kind == CostFunction::Kind::bpr) {
    cost = {{"kind", "bpr"}, {"alpha", c.cost.alpha}, {"beta", c.cost.beta}};
  } else {
    cost = {{"kind", "affine"}, {"slope", c.cost.slope}};
    if (!c.cost.affine_a.empty()) {
      cost["a"] = c.cost.affine_a;
      cost["b"] = c.cost.affine_b;
    }
  }
  return {{"max_iter", c.max_iter},       {"gap_tol", c.gap_tol},
          {"mode_choice", c.mode_choice}, {"freeze_mode_split", c.freeze_mode_split},
          {"mode_logit_scale", c.mode_logit_scale}, {"seed", c.seed},
          {"noise_sigma", c.noise_sigma}, {"cost", cost}};
}

void write_volume_csv(const std::filesystem::path& path, const RoadNetwork& net, const std::vector<double>& volume) {
  if (volume.size() != net.edges().size()) throw OracleError("volume vector does not match edge count");
  std::ofstream out(path);
  if (!out) throw OracleError("cannot write " + path.string());
  out << "edge_id,volume\n";
  char buf[64];
  for (std::size_t e = 0; e < volume.size(); ++e) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, volume[e]);
    out << net.edges()[e].id << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
  }
}

std::vector<double> read_volume_csv(const std::filesystem::path& path, const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw OracleError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("edge_id,volume", 0) != 0) throw OracleError(path.string() + ": unexpected header");
  std::vector<double> volume(net.edges().size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(volume.size(), false);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw OracleError(path.string() + ": malformed row " + std::to_string(row));
    const std::string id = line.substr(0, comma);
    if (!net.has_edge(id)) throw OracleError(path.string() + ": unknown edge '" + id + "'");
    double v = 0.0;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw OracleError(path.string() + ": bad volume on row " + std::to_string(row));
    const auto idx = net.edge_index(id);
    volume[idx] = v;
    seen[idx] = true;
  }
  for (std::size_t e = 0; e < seen.size(); ++e) {
    if (!seen[e]) throw OracleError(path.string() + ": missing volume for edge '" + net.edges()[e].id + "'");
  }
  return volume;
}

std::uint64_t scenario_seed(const std::string& scenario_id, std::uint64_t base_seed) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : scenario_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h ^ (base_seed * 0x9E3779B97F4A7C15ULL);
}

}  // namespace policygnn

#include "policygnn/service.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include <httplib.h>

#include "policygnn/checkpoint.hpp"
#include "policygnn/log.hpp"
#include "policygnn/traffic_oracle.hpp"

namespace policygnn {

namespace {

std::vector<std::string> string_list(const nlohmann::json& request, const char* key) {
  if (!request.contains(key) || request.at(key).is_null()) return {};
  const auto& v = request.at(key);
  if (!v.is_array()) throw RequestError(422, std::string("'") + key + "' must be an array of strings");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& item : v) {
    if (!item.is_string()) throw RequestError(422, std::string("'") + key + "' must be an array of strings");
    out.push_back(item.get<std::string>());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

PolicyService::PolicyService(Surrogate surrogate, ServiceOptions options)
    : surrogate_(std::move(surrogate)), options_(std::move(options)) {
  const RoadNetwork& net = surrogate_.network();
  const auto& base = surrogate_.base_volume();

  auto nodes = nlohmann::json::array();
  for (const Node& n : net.nodes()) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  auto edges = nlohmann::json::array();
  for (std::size_t e = 0; e < net.edges().size(); ++e) {
    const Edge& edge = net.edges()[e];
    const Node& a = net.nodes()[net.tail_index(e)];
    const Node& b = net.nodes()[net.head_index(e)];
    edges.push_back({{"id", edge.id},
                     {"from", edge.from},
                     {"to", edge.to},
                     {"highway", to_string(edge.highway_class)},
                     {"district", edge.district ? nlohmann::json(*edge.district) : nlohmann::json(nullptr)},
                     {"capacity", edge.capacity},
                     {"length", edge.length},
                     {"coords", {{a.x, a.y}, {b.x, b.y}}},
                     {"base_volume", base[e]}});
  }
  network_payload_ = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};

  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> members;
  for (const auto& d : net.districts()) members[d];
  for (const Edge& edge : net.edges()) {
    if (!edge.district) continue;
    auto& [all, reducible] = members[*edge.district];
    all.push_back(edge.id);
    if (is_higher_order(edge.highway_class)) reducible.push_back(edge.id);
  }
  std::map<std::string, std::vector<std::string>> neighbors;
  auto adjacency = nlohmann::json::array();
  for (const auto& [a, b] : net.district_adjacency()) {
    neighbors[a].push_back(b);
    if (a < b) adjacency.push_back({a, b});
  }
  auto list = nlohmann::json::array();
  for (const auto& d : net.districts()) {
    list.push_back({{"id", d},
                    {"neighbors", neighbors[d]},
                    {"edges", members[d].first},
                    {"reducible_edges", members[d].second}});
  }
  districts_payload_ = {{"districts", std::move(list)}, {"adjacency", std::move(adjacency)}};
}

nlohmann::json PolicyService::health() const {
  return {{"status", "ok"},
          {"checkpoint_id", surrogate_.checkpoint_id()},
          {"edges", surrogate_.network().edges().size()},
          {"requests_served", served_.load()}};
}

nlohmann::json PolicyService::network() const { return network_payload_; }

nlohmann::json PolicyService::districts() const { return districts_payload_; }

nlohmann::json PolicyService::predict(const nlohmann::json& request) const {
  const auto start = std::chrono::steady_clock::now();
  if (!request.is_object()) throw RequestError(422, "request body must be a JSON object");

  PolicyScenario scenario;
  scenario.districts = string_list(request, "districts");
  scenario.edges = string_list(request, "edges");
  if (scenario.edges.size() > options_.max_edges) {
    throw RequestError(413, "edge list has " + std::to_string(scenario.edges.size()) + " ids; the limit is " +
                                std::to_string(options_.max_edges));
  }
  if (request.contains("reduction")) {
    const auto& r = request.at("reduction");
    if (!r.is_number()) throw RequestError(422, "'reduction' must be a number");
    scenario.reduction = r.get<double>();
  }
  if (!(scenario.reduction >= 0.0 && scenario.reduction <= 1.0)) {
    throw RequestError(422, "reduction must lie in [0, 1]");
  }
  const RoadNetwork& net = surrogate_.network();
  for (const auto& d : scenario.districts) {
    if (!net.has_district(d)) throw RequestError(422, "unknown district '" + d + "'");
  }
  for (const auto& e : scenario.edges) {
    if (!net.has_edge(e)) throw RequestError(422, "unknown edge '" + e + "'");
  }
  scenario.id = scenario_id_for(scenario.districts);

  const auto prediction = surrogate_.predict(scenario);
  const auto& base = surrogate_.base_volume();
  auto edges = nlohmann::json::array();
  for (std::size_t e = 0; e < net.edges().size(); ++e) {
    if (!std::isfinite(prediction.delta[e])) throw RequestError(500, "model produced a non-finite prediction");
    const auto& pct = prediction.percent[e];
    edges.push_back({{"id", net.edges()[e].id},
                     {"delta", prediction.delta[e]},
                     {"percent", pct ? nlohmann::json(*pct) : nlohmann::json(nullptr)},
                     {"base_volume", base[e]}});
  }
  ++served_;
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {{"checkpoint_id", surrogate_.checkpoint_id()},
          {"scaler_version", surrogate_.checkpoint().scaler.feature_spec_version},
          {"scenario_id", scenario.id},
          {"reduction", scenario.reduction},
          {"latency_ms", ms},
          {"edges", std::move(edges)}};
}

nlohmann::json PolicyService::predict_body(const std::string& body) const {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError(422, std::string("malformed JSON: ") + e.what());
  }
  return predict(request);
}

void PolicyService::mount(httplib::Server& server) const {
  const std::string origin = options_.cors_origin;
  server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto send = [](httplib::Response& res, const nlohmann::json& body) {
    res.set_content(body.dump(), "application/json; charset=utf-8");
  };
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Get("/network", [this, send](const httplib::Request&, httplib::Response& res) { send(res, network()); });
  server.Get("/districts", [this, send](const httplib::Request&, httplib::Response& res) { send(res, districts()); });
  server.Post("/predict", [this, send](const httplib::Request& req, httplib::Response& res) {
    try {
      send(res, predict_body(req.body));
    } catch (const RequestError& e) {
      res.status = e.status();
      send(res, {{"error", e.what()}});
    } catch (const std::exception& e) {
      res.status = 500;
      send(res, {{"error", e.what()}});
    }
  });
}

Surrogate load_surrogate(const std::filesystem::path& dataset_dir, const std::filesystem::path& checkpoint_dir) {
  RoadNetwork net = load_network(dataset_dir / "network.json");
  auto base = read_volume_csv(dataset_dir / "base.csv", net);
  return Surrogate(std::move(net), std::move(base), load_checkpoint(checkpoint_dir));
}

void serve(const PolicyService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  log::info("serving checkpoint " + service.surrogate().checkpoint_id() + " on http://" + host + ":" +
            std::to_string(port));
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace policygnn

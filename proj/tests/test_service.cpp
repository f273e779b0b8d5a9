#include <doctest.h>

#include <thread>

#include "policygnn/service.hpp"
#include "service_support.hpp"

// After Eigen: httplib pulls in system headers whose macros clash with it.
#include <httplib.h>

using namespace policygnn;

namespace {

nlohmann::json without_latency(nlohmann::json r) {
  r.erase("latency_ms");
  return r;
}

int status_of(const PolicyService& s, const nlohmann::json& request) {
  try {
    s.predict(request);
  } catch (const RequestError& e) {
    return e.status();
  }
  return 200;
}

}  // namespace

TEST_SUITE("policy_service") {

TEST_CASE("health, network and districts payloads") {
  testing::ServedGrid g("svc_payloads");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir));
  const auto h = svc.health();
  CHECK(h.at("status") == "ok");
  CHECK(h.at("checkpoint_id") == svc.surrogate().checkpoint_id());

  const auto net = svc.network();
  CHECK(net.at("nodes").size() == 4);
  REQUIRE(net.at("edges").size() == 8);
  const auto& ab = net.at("edges")[0];
  CHECK(ab.at("id") == "AB");
  CHECK(ab.at("highway") == "primary");
  CHECK(ab.at("base_volume") == 100.0);
  CHECK(ab.at("coords") == nlohmann::json::parse("[[0.0, 0.0], [100.0, 0.0]]"));

  const auto d = svc.districts();
  REQUIRE(d.at("districts").size() == 2);
  const auto& east = d.at("districts")[0];
  CHECK(east.at("id") == "east");
  CHECK(east.at("neighbors") == nlohmann::json::array({"west"}));
  CHECK(east.at("edges").size() == 4);
  CHECK(east.at("reducible_edges").size() == 4);
  CHECK(d.at("districts")[1].at("reducible_edges").size() == 2);  // AC/CA are residential
  CHECK(d.at("adjacency").size() == 1);
}

TEST_CASE("prediction response") {
  testing::ServedGrid g("svc_predict");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir));
  const auto r = svc.predict({{"districts", {"west"}}, {"reduction", 0.5}});
  REQUIRE(r.at("edges").size() == 8);
  CHECK(r.at("checkpoint_id") == svc.surrogate().checkpoint_id());
  CHECK(r.at("scaler_version") == kFeatureSpecVersion);
  CHECK(r.at("latency_ms").get<double>() >= 0.0);
  for (std::size_t e = 0; e < 8; ++e) {
    const auto& row = r.at("edges")[e];
    CHECK(std::isfinite(row.at("delta").get<double>()));
    CHECK(row.at("base_volume") == g.base[e]);
    if (g.base[e] == 0.0) CHECK(row.at("percent").is_null());
    else CHECK(row.at("percent").get<double>() == 100.0 * row.at("delta").get<double>() / g.base[e]);
  }
  CHECK(without_latency(svc.predict({{"districts", {"west"}}, {"reduction", 0.5}})) == without_latency(r));
  CHECK(svc.requests_served() == 2);
}

TEST_CASE("empty policy equals the all-zero forward pass") {
  testing::ServedGrid g("svc_identity");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir));
  const auto r = svc.predict({{"districts", nlohmann::json::array()}, {"reduction", 0.0}});
  PolicyScenario none;
  none.reduction = 0.0;
  const auto direct = svc.surrogate().predict(none);
  REQUIRE(r.at("edges").size() == 8);
  for (std::size_t e = 0; e < 8; ++e) CHECK(r.at("edges")[e].at("delta").get<double>() == direct.delta[e]);
}

TEST_CASE("request equal to a test scenario matches the offline prediction") {
  testing::ServedGrid g("svc_offline");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir));
  const auto& s = g.dataset.scenarios[g.dataset.index_of(g.dataset.split.test[0])];
  const auto& ck = svc.surrogate().checkpoint();
  const auto& sample = g.dataset.samples[g.dataset.index_of(s.id)];
  const nn::Vector z = ck.model.predict(to_graph_input(sample, ck.scaler));
  const auto offline = inverse_transform_target(std::span<const double>(z.data(), std::size_t(z.size())), ck.scaler);
  const auto r = svc.predict({{"districts", s.districts}, {"reduction", s.reduction}});
  for (std::size_t e = 0; e < 8; ++e) CHECK(r.at("edges")[e].at("delta").get<double>() == offline[e]);
}

TEST_CASE("validation errors") {
  testing::ServedGrid g("svc_errors");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir), ServiceOptions{3, "*"});
  try {
    svc.predict({{"districts", {"west", "D99"}}});
    FAIL("expected RequestError");
  } catch (const RequestError& e) {
    CHECK(e.status() == 422);
    CHECK(std::string(e.what()).find("D99") != std::string::npos);
  }
  CHECK(status_of(svc, {{"districts", {"west"}}, {"reduction", 1.5}}) == 422);
  CHECK(status_of(svc, {{"districts", {"west"}}, {"reduction", -0.1}}) == 422);
  CHECK(status_of(svc, {{"districts", {"west"}}, {"reduction", "half"}}) == 422);
  CHECK(status_of(svc, {{"districts", "west"}}) == 422);
  CHECK(status_of(svc, {{"edges", {"AB", "nope"}}}) == 422);
  CHECK(status_of(svc, nlohmann::json::array()) == 422);
  CHECK(status_of(svc, {{"edges", {"AB", "BA", "AC", "CA"}}}) == 413);
  CHECK(status_of(svc, {{"edges", {"AB", "BA", "AC"}}, {"reduction", 1.0}}) == 200);
  CHECK_THROWS_AS(svc.predict_body("{not json"), RequestError);
}

TEST_CASE("concurrent requests match serial ones") {
  testing::ServedGrid g("svc_concurrent");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir));
  const std::vector<nlohmann::json> requests{{{"districts", {"west"}}, {"reduction", 0.5}},
                                             {{"districts", {"east"}}, {"reduction", 0.2}},
                                             {{"edges", {"AC", "DC"}}, {"reduction", 0.9}},
                                             {{"districts", {"east", "west"}}, {"reduction", 1.0}}};
  std::vector<nlohmann::json> serial;
  for (const auto& r : requests) serial.push_back(without_latency(svc.predict(r)));
  std::vector<nlohmann::json> parallel(requests.size() * 4);
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < parallel.size(); ++i) {
      threads.emplace_back([&, i] { parallel[i] = without_latency(svc.predict(requests[i % requests.size()])); });
    }
  }
  for (std::size_t i = 0; i < parallel.size(); ++i) CHECK(parallel[i] == serial[i % requests.size()]);
}

TEST_CASE("http routes") {
  testing::ServedGrid g("svc_http");
  const PolicyService svc(load_surrogate(g.dataset_dir, g.checkpoint_dir), ServiceOptions{100, "http://localhost:5173"});
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::jthread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(nlohmann::json::parse(health->body).at("status") == "ok");
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  auto network = client.Get("/network");
  REQUIRE(network);
  CHECK(nlohmann::json::parse(network->body).at("edges").size() == 8);
  auto districts = client.Get("/districts");
  REQUIRE(districts);
  CHECK(nlohmann::json::parse(districts->body).at("districts").size() == 2);

  auto ok = client.Post("/predict", R"({"districts": ["east"], "reduction": 0.5})", "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  const auto body = nlohmann::json::parse(ok->body);
  CHECK(without_latency(body) == without_latency(svc.predict({{"districts", {"east"}}, {"reduction", 0.5}})));

  auto bad = client.Post("/predict", R"({"districts": ["north"]})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  CHECK(nlohmann::json::parse(bad->body).at("error").get<std::string>().find("north") != std::string::npos);

  auto garbage = client.Post("/predict", "{", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 422);

  auto preflight = client.Options("/predict");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  server.stop();
}

}  // TEST_SUITE

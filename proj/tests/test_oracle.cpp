#include <doctest.h>

#include <cmath>
#include <numeric>

#include "policygnn/synthetic_city.hpp"
#include "policygnn/traffic_oracle.hpp"
#include "support.hpp"

using namespace policygnn;

namespace {

OracleConfig car_only(double gap_tol = 1e-6, int max_iter = 20000) {
  OracleConfig c;
  c.mode_choice = false;
  c.gap_tol = gap_tol;
  c.max_iter = max_iter;
  return c;
}

std::vector<OdDemand> grid_demand() {
  return {{"A", "D", 300, 40}, {"D", "A", 200, 35}, {"B", "C", 250, 45}, {"C", "B", 150, 30}, {"A", "B", 100, 25}};
}

}  // namespace

TEST_SUITE("traffic_oracle") {

TEST_CASE("single route carries all demand") {
  std::vector<Node> nodes{{"o", 0, 0}, {"d", 1, 0}};
  const auto net = RoadNetwork::create(nodes, {testing::make_edge("only", "o", "d")}, {});
  const auto r = assign(net, {{"o", "d", 100, 0}}, car_only());
  CHECK(r.volume[0] == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.converged);
}

TEST_CASE("symmetric two-route split is 50/50") {
  const auto net = load_network(testing::fixture("two_route.json"));
  auto c = car_only(1e-6);
  c.cost = CostFunction::affine({1.0, 1.0}, {0.1, 0.1});
  const auto r = assign(net, load_demand(testing::fixture("two_route_demand.json")), c);
  CHECK(r.converged);
  CHECK(r.relative_gap <= c.gap_tol);
  CHECK(std::abs(r.volume[0] - 50.0) <= 100.0 * c.gap_tol);
  CHECK(std::abs(r.volume[1] - 50.0) <= 100.0 * c.gap_tol);
}

TEST_CASE("asymmetric affine routes reach the analytic equilibrium") {
  // t1 = 1 + v1/10, t2 = 2 + v2/10, v1 + v2 = 15  =>  v1 = 12.5, v2 = 2.5
  const auto net = load_network(testing::fixture("two_route.json"));
  auto c = car_only(1e-6);
  c.cost = CostFunction::affine({1.0, 2.0}, {0.1, 0.1});
  const auto r = assign(net, {{"o", "d", 15, 0}}, c);
  CHECK(r.converged);
  CHECK(std::abs(r.volume[0] - 12.5) <= 0.05);
  CHECK(std::abs(r.volume[1] - 2.5) <= 0.05);
}

TEST_CASE("flow is conserved at every node") {
  const auto net = load_network(testing::fixture("grid4.json"));
  const auto demand = grid_demand();
  OracleConfig c;
  c.mode_logit_scale = 0.05;
  c.noise_sigma = 0.2;
  c.seed = 3;
  const auto r = assign(net, demand, c);
  std::vector<double> balance(net.nodes().size(), 0.0);  // inflow - outflow
  for (std::size_t e = 0; e < net.edges().size(); ++e) {
    balance[net.head_index(e)] += r.volume[e];
    balance[net.tail_index(e)] -= r.volume[e];
  }
  double total = 0.0;
  for (std::size_t k = 0; k < demand.size(); ++k) {
    balance[net.node_index(demand[k].destination)] -= r.car_demand[k];
    balance[net.node_index(demand[k].origin)] += r.car_demand[k];
    total += r.car_demand[k];
    CHECK(r.car_share[k] > 0.0);
    CHECK(r.car_share[k] < 1.0);
  }
  for (double b : balance) CHECK(std::abs(b) <= 1e-6 * total);
}

TEST_CASE("relative gap checkpoints do not increase on the shipped networks") {
  const auto grid = load_network(testing::fixture("grid4.json"));
  auto c = car_only(1e-9, 4096);
  const auto r1 = assign(grid, grid_demand(), c);
  CityConfig city;
  city.columns = 8;
  city.rows = 8;
  city.district_columns = 2;
  city.district_rows = 2;
  const auto small = generate_city(city);
  OracleConfig cc;
  cc.gap_tol = 1e-7;
  cc.max_iter = 1024;
  const auto r2 = assign(small.network, small.demand, cc);
  for (const auto* r : {&r1, &r2}) {
    REQUIRE(r->gap_checkpoints.size() >= 4);
    for (std::size_t i = 1; i < r->gap_checkpoints.size(); ++i) {
      CHECK(r->gap_checkpoints[i].second <= r->gap_checkpoints[i - 1].second + 1e-12);
    }
  }
}

TEST_CASE("two-route gap: the first averaged iterate can exceed the all-or-nothing start") {
  // k = 1 is all 15 on route 1 (gap 0.2); k = 2 averages to 7.5/7.5 (gap 3/13.5).
  const auto two = load_network(testing::fixture("two_route.json"));
  auto c = car_only(1e-9, 4096);
  c.cost = CostFunction::affine({1.0, 2.0}, {0.1, 0.1});
  const auto r = assign(two, {{"o", "d", 15, 0}}, c);
  REQUIRE(r.gap_checkpoints.size() >= 3);
  CHECK(r.gap_checkpoints[0].second == doctest::Approx(0.2));
  CHECK(r.gap_checkpoints[1].second == doctest::Approx(3.0 / 13.5));
  for (std::size_t i = 2; i < r.gap_checkpoints.size(); ++i) {
    CHECK(r.gap_checkpoints[i].second <= r.gap_checkpoints[i - 1].second + 1e-12);
  }
}

TEST_CASE("non-convergence is reported, not thrown") {
  const auto net = load_network(testing::fixture("grid4.json"));
  const auto r = assign(net, grid_demand(), car_only(1e-12, 3));
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
  CHECK(r.relative_gap > 1e-12);
}

TEST_CASE("unreachable pair names both ends") {
  std::vector<Node> nodes{{"o", 0, 0}, {"d", 1, 0}};
  const auto net = RoadNetwork::create(nodes, {testing::make_edge("back", "d", "o")}, {});
  try {
    assign(net, {{"o", "d", 10, 0}}, car_only());
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'o'") != std::string::npos);
    CHECK(msg.find("'d'") != std::string::npos);
  }
}

TEST_CASE("logit car share") {
  CHECK(logit_car_share(120.0, 120.0, 0.3) == 0.5);
  CHECK(logit_car_share(10.0, 9999.0, 0.0) == 0.5);
  CHECK(logit_car_share(0.0, std::log(3.0), 1.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(logit_car_share(0.0, 1e6, 1.0) == 1.0);
  CHECK(logit_car_share(1e6, 0.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("capacity reduction policy") {
  const auto net = load_network(testing::fixture("grid4.json"));
  PolicyScenario west;
  west.districts = {"west"};
  west.reduction = 0.5;
  const auto reduced = apply_policy(net, west);
  CHECK(reduced.edges()[net.edge_index("AB")].capacity == 500.0);  // primary inside
  CHECK(reduced.edges()[net.edge_index("AC")].capacity == 600.0);  // residential inside
  CHECK(reduced.edges()[net.edge_index("BD")].capacity == 800.0);  // other district

  PolicyScenario none;
  none.reduction = 0.5;
  const auto same = apply_policy(net, none);
  for (std::size_t e = 0; e < net.edges().size(); ++e) CHECK(same.edges()[e].capacity == net.edges()[e].capacity);

  PolicyScenario street;
  street.edges = {"AC"};
  street.reduction = 1.0;
  CHECK(apply_policy(net, street).edges()[net.edge_index("AC")].capacity == doctest::Approx(600.0 * 1e-6));

  PolicyScenario unknown;
  unknown.districts = {"north"};
  CHECK_THROWS_AS(apply_policy(net, unknown), PolicyError);
  west.reduction = 1.5;
  CHECK_THROWS_AS(apply_policy(net, west), PolicyError);
}

TEST_CASE("base volume averaging") {
  const auto grid = load_network(testing::fixture("grid4.json"));
  OracleConfig c;
  c.noise_sigma = 0.0;
  const auto single = assign(grid, grid_demand(), c);
  const auto mean3 = base_volume(grid, grid_demand(), c, 3);
  for (std::size_t e = 0; e < single.volume.size(); ++e) CHECK(mean3[e] == doctest::Approx(single.volume[e]).epsilon(1e-12));

  c.noise_sigma = 0.3;
  c.seed = 99;
  auto c0 = c;
  c0.seed = 0;
  CHECK(base_volume(grid, grid_demand(), c, 1) == assign(grid, grid_demand(), c0).volume);

  const auto two = load_network(testing::fixture("two_route.json"));
  const auto demand = load_demand(testing::fixture("two_route_demand.json"));
  OracleConfig n;
  n.noise_sigma = 0.1;
  n.mode_choice = false;
  n.cost = CostFunction::affine({1.0, 1.0}, {0.1, 0.1});
  std::vector<double> sum(2, 0.0);
  for (std::uint64_t s = 0; s < 4; ++s) {
    n.seed = s;
    const auto v = assign(two, demand, n).volume;
    sum[0] += v[0];
    sum[1] += v[1];
  }
  const auto mean4 = base_volume(two, demand, n, 4);
  CHECK(mean4[0] == doctest::Approx(sum[0] / 4).epsilon(1e-12));
  CHECK(mean4[1] == doctest::Approx(sum[1] / 4).epsilon(1e-12));
  CHECK(mean4[0] + mean4[1] != doctest::Approx(100.0));  // noise moved the total
}

TEST_CASE("assignment is deterministic per seed and varies across seeds") {
  const auto net = load_network(testing::fixture("grid4.json"));
  OracleConfig c;
  c.noise_sigma = 0.2;
  c.seed = 11;
  CHECK(assign(net, grid_demand(), c).volume == assign(net, grid_demand(), c).volume);
  auto other = c;
  other.seed = 12;
  CHECK(assign(net, grid_demand(), c).volume != assign(net, grid_demand(), other).volume);
}

TEST_CASE("volume csv round trips exactly") {
  const auto net = load_network(testing::fixture("grid4.json"));
  std::vector<double> v{0.1, 1.0 / 3.0, 2e-17, 123456.789, 0.0, 7.0, 1e300, 5.5};
  const auto path = testing::scratch_dir("csv") / "v.csv";
  write_volume_csv(path, net, v);
  CHECK(read_volume_csv(path, net) == v);
}

TEST_CASE("config json round trip") {
  OracleConfig c;
  c.max_iter = 77;
  c.noise_sigma = 0.03;
  c.cost = CostFunction::affine({1, 2}, {3, 4});
  const auto back = oracle_config_from_json(oracle_config_to_json(c));
  CHECK(back.max_iter == 77);
  CHECK(back.noise_sigma == 0.03);
  CHECK(back.cost.kind == CostFunction::Kind::affine);
  CHECK(back.cost.affine_b == std::vector<double>{3, 4});
}

}  // TEST_SUITE

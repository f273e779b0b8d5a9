#include <doctest.h>

#include <random>

#include "policygnn/metrics.hpp"

using namespace policygnn;
using namespace policygnn::metrics;

namespace {

using V = std::vector<double>;

EdgeView view(HighwayClass c, bool reduced, double length = 1000.0) { return {c, reduced, "", length}; }

}  // namespace

TEST_SUITE("metrics_eval") {

TEST_CASE("mse examples") {
  CHECK(mse(V{1, 2, 3}, V{1, 2, 3}) == 0.0);
  CHECK(mse(V{0, 0}, V{1, 1}) == 1.0);
  CHECK_THROWS_AS(mse(V{1}, V{1, 2}), MetricError);
  CHECK_THROWS_AS(mse(V{}, V{}), MetricError);
}

TEST_CASE("mse on changes equals mse on levels") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    V y(40), yhat(40), by(40), byhat(40);
    for (std::size_t e = 0; e < y.size(); ++e) {
      const double b = 500.0 + n(rng);
      y[e] = n(rng);
      yhat[e] = n(rng);
      by[e] = b + y[e];
      byhat[e] = b + yhat[e];
    }
    CHECK(std::abs(mse(y, yhat) - mse(by, byhat)) <= 1e-12 * std::max(1.0, mse(y, yhat)) * 1e3);
  }
}

TEST_CASE("r squared examples") {
  const V y{1, 4, 2, 7};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, V(4, 3.5)) == 0.0);
  CHECK(r_squared(V{0, 2}, V{2, 0}) == -3.0);
  CHECK(r_squared(y, V(4, 10.0)) < 0.0);
  CHECK_THROWS_AS(r_squared(V{3, 3, 3}, V{1, 2, 3}), MetricError);
}

TEST_CASE("r squared is one minus mse over baseline") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    V y(25), yhat(25);
    for (std::size_t e = 0; e < y.size(); ++e) {
      y[e] = n(rng);
      yhat[e] = y[e] + 0.7 * n(rng);
    }
    CHECK(std::abs(r_squared(y, yhat) - (1.0 - mse(y, yhat) / baseline_mse(y))) < 1e-9);
  }
}

TEST_CASE("baseline mse") {
  CHECK(baseline_mse(V{0, 2}) == 1.0);
  CHECK(baseline_mse(V{5, 5, 5}) == 0.0);
  const V y{3, -1, 8, 2};
  const double mean = 3.0;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  CHECK(baseline_mse(y) == ss / 4.0);
  CHECK(baseline_mse(y) == mse(y, V(4, mean)));
}

TEST_CASE("variance of squared differences") {
  CHECK(variance_squared_diff(V{1, 1, 1}) == 0.0);
  CHECK(variance_squared_diff(V{0, 2}) == 0.0);
  CHECK(variance_squared_diff(V{0, 0, 3}) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("standard filters cover every table row") {
  const auto f = standard_filters();
  REQUIRE(f.size() == 10);
  CHECK(f[0].predicate(view(HighwayClass::other, false)));
  int primary_rows = 0;
  for (const auto& x : f) primary_rows += x.predicate(view(HighwayClass::primary, true)) ? 1 : 0;
  CHECK(primary_rows == 5);  // all, primary, higher-order, reduced, higher-order reduced
  const auto d = by_districts({"D02"}, "d2");
  CHECK(d.predicate({HighwayClass::other, false, "D02", 1.0}));
  CHECK_FALSE(d.predicate({HighwayClass::other, false, "D03", 1.0}));
}

TEST_CASE("perfect predictions and empty subsets") {
  ScenarioOutcome s;
  s.scenario_id = "none";
  s.edges = {view(HighwayClass::primary, false, 500), view(HighwayClass::other, false, 250),
             view(HighwayClass::secondary, false, 250)};
  s.y = {1.0, -2.0, 4.0};
  s.yhat = s.y;
  const auto report = evaluate_subsets({s}, standard_filters());
  const auto& all = report.rows[0];
  CHECK(all.subset == "All roads");
  CHECK(all.model_mse == 0.0);
  CHECK(all.r2 == 1.0);
  CHECK(all.length_km == 1.0);
  CHECK_FALSE(all.flagged());
  bool saw_reduced = false;
  for (const auto& row : report.rows) {
    if (row.subset == "Roads with capacity reduction") {
      saw_reduced = true;
      CHECK(row.flagged());
      CHECK(row.scenarios == 0);
    }
  }
  CHECK(saw_reduced);
  CHECK(report.to_text().find("All roads") != std::string::npos);
  CHECK(report.to_csv().starts_with("subset,length_km,variance,baseline_mse,model_mse,r2"));
}

TEST_CASE("rows average per-scenario metrics") {
  // Scenario A on edges (y, yhat): (0, 1), (2, 2)    -> mse 0.5, baseline 1, r2 0.5
  // Scenario B on edges:           (1, 1), (5, 3), (3, 2) -> mse 5/3, baseline 8/3, r2 3/8
  ScenarioOutcome a{"A", {view(HighwayClass::primary, true), view(HighwayClass::other, false)}, {0, 2}, {1, 2}};
  ScenarioOutcome b{"B",
                    {view(HighwayClass::primary, false), view(HighwayClass::other, true), view(HighwayClass::other, false)},
                    {1, 5, 3},
                    {1, 3, 2}};
  const auto report = evaluate_subsets({a, b}, {all_edges()});
  REQUIRE(report.rows.size() == 1);
  const auto& row = report.rows[0];
  CHECK(row.scenarios == 2);
  CHECK(row.model_mse == doctest::Approx((0.5 + 5.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(row.baseline_mse == doctest::Approx((1.0 + 8.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(row.r2 == doctest::Approx((0.5 + 3.0 / 8.0) / 2.0).epsilon(1e-12));
  // Variance of squared differences: A d = (1, 1) -> 0; B mean 3, d = (4, 4, 0) -> 32/9.
  CHECK(row.variance == doctest::Approx((0.0 + 32.0 / 9.0) / 2.0).epsilon(1e-12));
  CHECK(row.length_km == doctest::Approx(2.5).epsilon(1e-12));
}

}  // TEST_SUITE

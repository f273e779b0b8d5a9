#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "policygnn/road_network.hpp"

namespace policygnn::metrics {

class MetricError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// (1/|E|) sum (y_e - yhat_e)^2
double mse(std::span<const double> y, std::span<const double> yhat);

/// 1 - SS_res / SS_tot. Throws MetricError when SS_tot is zero or |E| < 2.
double r_squared(std::span<const double> y, std::span<const double> yhat);

/// MSE of the constant mean predictor, i.e. the population variance of y.
double baseline_mse(std::span<const double> y);

/// Population variance of d_e = (y_e - mean(y))^2.
double variance_squared_diff(std::span<const double> y);

/// Per-edge attributes a subset filter can select on, for one scenario.
struct EdgeView {
  HighwayClass highway_class = HighwayClass::other;
  bool reduced = false;  // capacity reduction applied in this scenario
  std::string district;  // empty when unassigned
  double length_m = 0.0;
};

struct EdgeSubsetFilter {
  std::string name;
  std::function<bool(const EdgeView&)> predicate;
};

EdgeSubsetFilter all_edges();
EdgeSubsetFilter by_classes(std::vector<HighwayClass> classes, std::string name);
EdgeSubsetFilter by_reduction(bool reduced, std::string name);
EdgeSubsetFilter by_districts(std::vector<std::string> districts, std::string name);
EdgeSubsetFilter both(const EdgeSubsetFilter& a, const EdgeSubsetFilter& b, std::string name);

/// The ten road subsets of the standard breakdown: all roads; each higher-order
/// class; higher-order combined; other roads; with/without capacity reduction;
/// higher-order with/without reduction.
std::vector<EdgeSubsetFilter> standard_filters();

/// Labels and predictions for one scenario, aligned with `edges`.
struct ScenarioOutcome {
  std::string scenario_id;
  std::vector<EdgeView> edges;
  std::vector<double> y;
  std::vector<double> yhat;
};

struct EvalRow {
  std::string subset;
  double length_km = 0.0;
  double variance = 0.0;      // variance of squared difference
  double baseline_mse = 0.0;
  double model_mse = 0.0;
  double r2 = 0.0;
  std::size_t scenarios = 0;  // scenarios contributing to the averages
  std::size_t skipped = 0;    // scenarios where the subset was empty or had zero variance
  bool flagged() const { return skipped > 0; }
};

/// Per subset: metrics per scenario on the selected edges, then the arithmetic
/// mean over scenarios. A scenario whose subset is empty (or has zero
/// variance, leaving R^2 undefined) is skipped for that row and the row is
/// flagged.
struct EvalReport {
  std::vector<EvalRow> rows;

  std::string to_csv() const;
  std::string to_text() const;
};

EvalReport evaluate_subsets(const std::vector<ScenarioOutcome>& scenarios, const std::vector<EdgeSubsetFilter>& filters);

}  // namespace policygnn::metrics

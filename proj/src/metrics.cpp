#include "policygnn/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace policygnn::metrics {

namespace {

double mean(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v;
  return s / static_cast<double>(y.size());
}

void require_nonempty(std::span<const double> y, const char* what) {
  if (y.empty()) throw MetricError(std::string(what) + ": empty input");
}

}  // namespace

double mse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw MetricError("mse: length mismatch");
  require_nonempty(y, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

double baseline_mse(std::span<const double> y) {
  require_nonempty(y, "baseline_mse");
  const double m = mean(y);
  double s = 0.0;
  for (double v : y) s += (v - m) * (v - m);
  return s / static_cast<double>(y.size());
}

double r_squared(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw MetricError("r_squared: length mismatch");
  if (y.size() < 2) throw MetricError("r_squared: need at least two values");
  const double ss_tot = baseline_mse(y);
  if (!(ss_tot > 0.0)) throw MetricError("r_squared: observed values have zero variance");
  return 1.0 - mse(y, yhat) / ss_tot;
}

double variance_squared_diff(std::span<const double> y) {
  require_nonempty(y, "variance_squared_diff");
  const double m = mean(y);
  std::vector<double> d(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) d[i] = (y[i] - m) * (y[i] - m);
  const double dm = mean(d);
  double s = 0.0;
  for (double v : d) s += (v - dm) * (v - dm);
  return s / static_cast<double>(d.size());
}

EdgeSubsetFilter all_edges() {
  return {"All roads", [](const EdgeView&) { return true; }};
}

EdgeSubsetFilter by_classes(std::vector<HighwayClass> classes, std::string name) {
  return {std::move(name), [classes = std::move(classes)](const EdgeView& e) {
            return std::find(classes.begin(), classes.end(), e.highway_class) != classes.end();
          }};
}

EdgeSubsetFilter by_reduction(bool reduced, std::string name) {
  return {std::move(name), [reduced](const EdgeView& e) { return e.reduced == reduced; }};
}

EdgeSubsetFilter by_districts(std::vector<std::string> districts, std::string name) {
  std::sort(districts.begin(), districts.end());
  return {std::move(name), [districts = std::move(districts)](const EdgeView& e) {
            return !e.district.empty() && std::binary_search(districts.begin(), districts.end(), e.district);
          }};
}

EdgeSubsetFilter both(const EdgeSubsetFilter& a, const EdgeSubsetFilter& b, std::string name) {
  return {std::move(name), [pa = a.predicate, pb = b.predicate](const EdgeView& e) { return pa(e) && pb(e); }};
}

std::vector<EdgeSubsetFilter> standard_filters() {
  using enum HighwayClass;
  const auto higher = by_classes({primary, secondary, tertiary}, "Roads of type primary, secondary or tertiary");
  return {
      all_edges(),
      by_classes({primary}, "Roads of type primary"),
      by_classes({secondary}, "Roads of type secondary"),
      by_classes({tertiary}, "Roads of type tertiary"),
      higher,
      by_classes({other}, "Roads of types other than primary, secondary, tertiary"),
      by_reduction(true, "Roads with capacity reduction"),
      by_reduction(false, "Roads without capacity reduction"),
      both(higher, by_reduction(true, "reduced"),
           "Roads of types primary, secondary, tertiary, and capacity reduction"),
      both(higher, by_reduction(false, "not reduced"),
           "Roads of types primary, secondary, tertiary, and no capacity reduction"),
  };
}

EvalReport evaluate_subsets(const std::vector<ScenarioOutcome>& scenarios, const std::vector<EdgeSubsetFilter>& filters) {
  for (const auto& s : scenarios) {
    if (s.y.size() != s.edges.size() || s.yhat.size() != s.edges.size()) {
      throw MetricError("scenario '" + s.scenario_id + "': predictions do not cover every edge");
    }
  }
  EvalReport report;
  std::vector<double> y;
  std::vector<double> yhat;
  for (const auto& filter : filters) {
    EvalRow row;
    row.subset = filter.name;
    for (const auto& s : scenarios) {
      y.clear();
      yhat.clear();
      double length = 0.0;
      for (std::size_t e = 0; e < s.edges.size(); ++e) {
        if (!filter.predicate(s.edges[e])) continue;
        y.push_back(s.y[e]);
        yhat.push_back(s.yhat[e]);
        length += s.edges[e].length_m;
      }
      if (y.size() < 2 || !(baseline_mse(y) > 0.0)) {
        ++row.skipped;
        continue;
      }
      row.length_km += length / 1000.0;
      row.variance += variance_squared_diff(y);
      row.baseline_mse += baseline_mse(y);
      row.model_mse += mse(y, yhat);
      row.r2 += r_squared(y, yhat);
      ++row.scenarios;
    }
    if (row.scenarios > 0) {
      const auto n = static_cast<double>(row.scenarios);
      row.length_km /= n;
      row.variance /= n;
      row.baseline_mse /= n;
      row.model_mse /= n;
      row.r2 /= n;
    }
    report.rows.push_back(row);
  }
  return report;
}

namespace {
std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}
}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "subset,length_km,variance,baseline_mse,model_mse,r2,scenarios,skipped\n";
  for (const auto& r : rows) {
    out << '"' << r.subset << "\"," << num(r.length_km) << ',' << num(r.variance) << ',' << num(r.baseline_mse) << ','
        << num(r.model_mse) << ',' << num(r.r2) << ',' << r.scenarios << ',' << r.skipped << '\n';
  }
  return out.str();
}

std::string EvalReport::to_text() const {
  std::size_t width = 10;
  for (const auto& r : rows) width = std::max(width, r.subset.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %12s %14s %14s %12s %8s\n", static_cast<int>(width), "Road subset",
                "Length (km)", "Variance", "MSE: Baseline", "MSE: Model", "R^2");
  out << buf << std::string(width + 66, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %12.2f %14.2f %14.2f %12.2f %8.2f%s\n", static_cast<int>(width),
                  r.subset.c_str(), r.length_km, r.variance, r.baseline_mse, r.model_mse, r.r2,
                  r.flagged() ? "  *" : "");
    out << buf;
  }
  bool any = false;
  for (const auto& r : rows) any = any || r.flagged();
  if (any) out << "* some scenarios skipped: subset empty or with zero variance\n";
  return out.str();
}

}  // namespace policygnn::metrics

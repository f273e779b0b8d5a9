#include "policygnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "policygnn/binary_io.hpp"
#include "policygnn/log.hpp"

namespace policygnn {

const std::array<std::string, kFeatureDim>& feature_names() {
  static const std::array<std::string, kFeatureDim> names = {
      "base_volume", "base_capacity", "class_primary", "class_secondary", "class_tertiary",
      "class_other", "position_x",    "position_y",    "capacity_reduction"};
  return names;
}

GraphSample build_sample(const RoadNetwork& net, const DualGraph& dual, const PolicyScenario& scenario,
                         std::span<const double> base_volume, std::span<const double> scenario_volume) {
  const auto& edges = net.edges();
  if (base_volume.size() != edges.size() || scenario_volume.size() != edges.size()) {
    throw DatasetError("scenario '" + scenario.id + "': volume vectors must cover every edge");
  }
  const auto reduction = reduction_per_edge(net, scenario);

  GraphSample s;
  s.scenario_id = scenario.id;
  s.num_nodes = static_cast<std::uint32_t>(dual.size());
  s.features.assign(dual.size() * kFeatureDim, 0.0f);
  s.positions.resize(dual.size() * kPositionDim);
  s.targets.resize(dual.size());
  s.edges = dual.edges;

  for (std::size_t i = 0; i < dual.size(); ++i) {
    const DualNode& dn = dual.nodes[i];
    const Edge& e = edges[dn.edge_index];
    const double b = base_volume[dn.edge_index];
    const double v = scenario_volume[dn.edge_index];
    if (!std::isfinite(b) || !std::isfinite(v)) {
      throw DatasetError("scenario '" + scenario.id + "': non-finite volume on edge '" + e.id + "'");
    }
    float* row = s.features.data() + i * kFeatureDim;
    row[kBaseVolume] = static_cast<float>(b);
    row[kBaseCapacity] = static_cast<float>(e.capacity);
    row[kClassPrimary + static_cast<std::size_t>(e.highway_class)] = 1.0f;
    row[kPositionX] = static_cast<float>(dn.midpoint.x);
    row[kPositionY] = static_cast<float>(dn.midpoint.y);
    row[kCapacityReduction] = static_cast<float>(reduction[dn.edge_index]);
    s.positions[i * kPositionDim] = row[kPositionX];
    s.positions[i * kPositionDim + 1] = row[kPositionY];
    s.targets[i] = static_cast<float>(v - b);
  }
  return s;
}

nlohmann::json Scaler::to_json() const {
  return {{"feature_mean", feature_mean},     {"feature_std", feature_std},
          {"target_mean", target_mean},       {"target_std", target_std},
          {"position_mean", position_mean},   {"position_scale", position_scale},
          {"feature_spec_version", feature_spec_version}};
}

Scaler Scaler::from_json(const nlohmann::json& j) {
  Scaler s;
  try {
    s.feature_mean = j.at("feature_mean").get<std::array<double, kFeatureDim>>();
    s.feature_std = j.at("feature_std").get<std::array<double, kFeatureDim>>();
    s.target_mean = j.at("target_mean").get<double>();
    s.target_std = j.at("target_std").get<double>();
    s.position_mean = j.at("position_mean").get<std::array<double, kPositionDim>>();
    s.position_scale = j.at("position_scale").get<double>();
    s.feature_spec_version = j.at("feature_spec_version").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed scaler: ") + e.what());
  }
  return s;
}

Scaler fit_scaler(std::span<const GraphSample> train) {
  if (train.empty()) throw DatasetError("cannot fit a scaler on an empty training set");
  std::array<double, kFeatureDim> sum{};
  std::array<double, kFeatureDim> sq{};
  double tsum = 0.0;
  double tsq = 0.0;
  std::size_t rows = 0;
  // Two passes for numerically stable population statistics.
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.num_nodes; ++r) {
      for (std::size_t f = 0; f < kFeatureDim; ++f) sum[f] += s.features[r * kFeatureDim + f];
      tsum += s.targets[r];
    }
    rows += s.num_nodes;
  }
  if (rows == 0) throw DatasetError("training samples have no rows");
  const auto n = static_cast<double>(rows);
  Scaler sc;
  for (std::size_t f = 0; f < kFeatureDim; ++f) sc.feature_mean[f] = sum[f] / n;
  sc.target_mean = tsum / n;
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.num_nodes; ++r) {
      for (std::size_t f = 0; f < kFeatureDim; ++f) {
        const double d = s.features[r * kFeatureDim + f] - sc.feature_mean[f];
        sq[f] += d * d;
      }
      const double d = s.targets[r] - sc.target_mean;
      tsq += d * d;
    }
  }
  for (std::size_t f = 0; f < kFeatureDim; ++f) {
    const double sd = std::sqrt(sq[f] / n);
    if (sd > 0.0) {
      sc.feature_std[f] = sd;
    } else {
      sc.feature_std[f] = 1.0;
      log::warn("feature '" + feature_names()[f] + "' has zero variance in the training split; std set to 1");
    }
  }
  const double tsd = std::sqrt(tsq / n);
  if (tsd > 0.0) {
    sc.target_std = tsd;
  } else {
    sc.target_std = 1.0;
    log::warn("target has zero variance in the training split; std set to 1");
  }
  sc.position_mean = {sc.feature_mean[kPositionX], sc.feature_mean[kPositionY]};
  const double pooled = std::sqrt(0.5 * (sq[kPositionX] + sq[kPositionY]) / n);
  sc.position_scale = pooled > 0.0 ? pooled : 1.0;
  return sc;
}

StandardizedSample transform(const GraphSample& sample, const Scaler& scaler) {
  if (scaler.feature_spec_version != kFeatureSpecVersion) {
    throw DatasetError("scaler feature spec version " + std::to_string(scaler.feature_spec_version) +
                       " does not match " + std::to_string(kFeatureSpecVersion));
  }
  const auto n = static_cast<Eigen::Index>(sample.num_nodes);
  StandardizedSample out{nn::Matrix(n, kFeatureDim), nn::Matrix(n, kPositionDim), nn::Matrix(n, 1)};
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    for (std::size_t f = 0; f < kFeatureDim; ++f) {
      out.features(r, static_cast<Eigen::Index>(f)) =
          (static_cast<double>(sample.features[row * kFeatureDim + f]) - scaler.feature_mean[f]) / scaler.feature_std[f];
    }
    for (std::size_t p = 0; p < kPositionDim; ++p) {
      out.positions(r, static_cast<Eigen::Index>(p)) =
          (static_cast<double>(sample.positions[row * kPositionDim + p]) - scaler.position_mean[p]) /
          scaler.position_scale;
    }
    out.targets(r, 0) = (static_cast<double>(sample.targets[row]) - scaler.target_mean) / scaler.target_std;
  }
  return out;
}

StandardizedSample inverse_transform(const StandardizedSample& s, const Scaler& scaler) {
  StandardizedSample out = s;
  for (std::size_t f = 0; f < kFeatureDim; ++f) {
    const auto c = static_cast<Eigen::Index>(f);
    out.features.col(c) = s.features.col(c).array() * scaler.feature_std[f] + scaler.feature_mean[f];
  }
  for (std::size_t p = 0; p < kPositionDim; ++p) {
    const auto c = static_cast<Eigen::Index>(p);
    out.positions.col(c) = s.positions.col(c).array() * scaler.position_scale + scaler.position_mean[p];
  }
  out.targets = (s.targets.array() * scaler.target_std + scaler.target_mean).matrix();
  return out;
}

std::vector<double> inverse_transform_target(std::span<const double> values, const Scaler& scaler) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * scaler.target_std + scaler.target_mean;
  return out;
}

nn::GraphInput to_graph_input(const GraphSample& sample, const Scaler& scaler) {
  auto st = transform(sample, scaler);
  return {std::move(st.features), std::move(st.positions),
          nn::MessageGraph::build(sample.num_nodes, sample.edges, true)};
}

std::size_t Dataset::index_of(const std::string& scenario_id) const {
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (scenarios[i].id == scenario_id) return i;
  }
  throw DatasetError("unknown scenario '" + scenario_id + "'");
}

std::vector<const GraphSample*> Dataset::subset(const std::vector<std::string>& ids) const {
  std::vector<const GraphSample*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&samples[index_of(id)]);
  return out;
}

Dataset build_dataset(const RoadNetwork& net, const DualGraph& dual, std::vector<PolicyScenario> scenarios,
                      ScenarioSplit split, std::span<const double> base_volume,
                      const std::vector<std::vector<double>>& scenario_volumes) {
  if (scenario_volumes.size() != scenarios.size()) throw DatasetError("one volume vector per scenario required");
  Dataset ds;
  ds.samples.reserve(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    ds.samples.push_back(build_sample(net, dual, scenarios[i], base_volume, scenario_volumes[i]));
    std::vector<double> labels(ds.samples.back().targets.begin(), ds.samples.back().targets.end());
    scenarios[i].labels = std::move(labels);
  }
  ds.scenarios = std::move(scenarios);
  ds.split = std::move(split);

  std::vector<GraphSample> train;
  for (const auto& id : ds.split.train) train.push_back(ds.samples[ds.index_of(id)]);
  ds.scaler = fit_scaler(train);
  return ds;
}

void write_sample(const GraphSample& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  binary::write_magic(out, "GSAM");
  binary::write_u32(out, kSampleFormatVersion);
  binary::write_u32(out, s.num_nodes);
  binary::write_u32(out, static_cast<std::uint32_t>(kFeatureDim));
  binary::write_u32(out, static_cast<std::uint32_t>(s.edges.size()));
  binary::write_f32(out, s.features);
  binary::write_f32(out, s.positions);
  binary::write_f32(out, s.targets);
  for (const auto& [a, b] : s.edges) {
    binary::write_u32(out, a);
    binary::write_u32(out, b);
  }
  if (!out) throw DatasetError("write failed for " + path.string());
}

GraphSample read_sample(const std::filesystem::path& path, std::string scenario_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  try {
    binary::expect_magic(in, "GSAM");
    const auto version = binary::read_u32(in);
    if (version != kSampleFormatVersion) {
      throw DatasetError(path.string() + ": unsupported sample version " + std::to_string(version));
    }
    GraphSample s;
    s.scenario_id = std::move(scenario_id);
    s.num_nodes = binary::read_u32(in);
    const auto dim = binary::read_u32(in);
    if (dim != kFeatureDim) throw DatasetError(path.string() + ": feature dimension " + std::to_string(dim));
    const auto n_edges = binary::read_u32(in);
    s.features = binary::read_f32(in, std::size_t{s.num_nodes} * kFeatureDim);
    s.positions = binary::read_f32(in, std::size_t{s.num_nodes} * kPositionDim);
    s.targets = binary::read_f32(in, s.num_nodes);
    s.edges.resize(n_edges);
    for (auto& [a, b] : s.edges) {
      a = binary::read_u32(in);
      b = binary::read_u32(in);
    }
    return s;
  } catch (const binary::FormatError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

namespace {
std::string sample_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu.bin", i);
  return buf;
}
}  // namespace

void save_dataset(const Dataset& ds, const RoadNetwork& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "samples");
  nlohmann::json manifest;
  manifest["format"] = "GSAM";
  manifest["sample_format_version"] = kSampleFormatVersion;
  manifest["feature_spec_version"] = kFeatureSpecVersion;
  manifest["feature_names"] = feature_names();
  manifest["scaler"] = ds.scaler.to_json();
  manifest["split"] = {{"train", ds.split.train}, {"validation", ds.split.validation}, {"test", ds.split.test}};
  auto& list = manifest["scenarios"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    auto rec = scenario_to_json(ds.scenarios[i]);
    rec["file"] = "samples/" + sample_file(i);
    list.push_back(std::move(rec));
    write_sample(ds.samples[i], dir / "samples" / sample_file(i));
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(1) << '\n';
  save_network(net, dir / "network.json");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DatasetError("no manifest.json in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.value("feature_spec_version", 0u) != kFeatureSpecVersion) {
    throw DatasetError(dir.string() + ": feature spec version mismatch");
  }
  Dataset ds;
  ds.scaler = Scaler::from_json(manifest.at("scaler"));
  ds.split = split_from_json(manifest.at("split"));
  for (const auto& rec : manifest.at("scenarios")) {
    auto scenario = scenario_from_json(rec);
    auto sample = read_sample(dir / rec.at("file").get<std::string>(), scenario.id);
    scenario.labels = std::vector<double>(sample.targets.begin(), sample.targets.end());
    ds.scenarios.push_back(std::move(scenario));
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace policygnn

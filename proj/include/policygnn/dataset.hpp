#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/nn/model.hpp"
#include "policygnn/policy.hpp"
#include "policygnn/road_network.hpp"
#include "policygnn/scenario_gen.hpp"

namespace policygnn {

class DatasetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Version of the per-node feature layout below. Bump on any change to order,
/// width, or meaning.
inline constexpr std::uint32_t kFeatureSpecVersion = 1;
inline constexpr std::uint32_t kSampleFormatVersion = 1;
inline constexpr std::size_t kFeatureDim = 9;
inline constexpr std::size_t kPositionDim = 2;

enum Feature : std::size_t {
  kBaseVolume = 0,
  kBaseCapacity = 1,
  kClassPrimary = 2,
  kClassSecondary = 3,
  kClassTertiary = 4,
  kClassOther = 5,
  kPositionX = 6,
  kPositionY = 7,
  kCapacityReduction = 8,
};

const std::array<std::string, kFeatureDim>& feature_names();

/// One scenario as model input. Arrays are row-major float32 in dual-node order.
struct GraphSample {
  std::string scenario_id;
  std::uint32_t num_nodes = 0;
  std::vector<float> features;   // num_nodes x kFeatureDim
  std::vector<float> positions;  // num_nodes x kPositionDim, midpoints in meters
  std::vector<float> targets;    // num_nodes, y_e = v_e - b_e
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // dual edges

  float feature(std::size_t row, Feature f) const { return features[row * kFeatureDim + f]; }
  bool operator==(const GraphSample&) const = default;
};

/// Features and targets for `scenario` on the shared dual graph. Volumes are
/// per road edge in declaration order.
GraphSample build_sample(const RoadNetwork& net, const DualGraph& dual, const PolicyScenario& scenario,
                         std::span<const double> base_volume, std::span<const double> scenario_volume);

/// Standard scaling fitted on training samples (population statistics).
/// Positions for the relative-offset channel are centered and divided by one
/// pooled scale so that geometry stays isotropic.
struct Scaler {
  std::array<double, kFeatureDim> feature_mean{};
  std::array<double, kFeatureDim> feature_std{};
  double target_mean = 0.0;
  double target_std = 1.0;
  std::array<double, kPositionDim> position_mean{};
  double position_scale = 1.0;
  std::uint32_t feature_spec_version = kFeatureSpecVersion;

  nlohmann::json to_json() const;
  static Scaler from_json(const nlohmann::json& j);
  bool operator==(const Scaler&) const = default;
};

Scaler fit_scaler(std::span<const GraphSample> train);

struct StandardizedSample {
  nn::Matrix features;   // N x kFeatureDim
  nn::Matrix positions;  // N x kPositionDim
  nn::Matrix targets;    // N x 1
};

StandardizedSample transform(const GraphSample& sample, const Scaler& scaler);
/// Undoes `transform` for features, positions, and targets (in double precision).
StandardizedSample inverse_transform(const StandardizedSample& standardized, const Scaler& scaler);
std::vector<double> inverse_transform_target(std::span<const double> values, const Scaler& scaler);

/// Model input with the self-looped message layout.
nn::GraphInput to_graph_input(const GraphSample& sample, const Scaler& scaler);

struct Dataset {
  std::vector<PolicyScenario> scenarios;  // parallel to samples
  std::vector<GraphSample> samples;
  ScenarioSplit split;
  Scaler scaler;

  std::size_t index_of(const std::string& scenario_id) const;
  std::vector<const GraphSample*> subset(const std::vector<std::string>& ids) const;
};

/// Builds every sample and fits the scaler on the training split.
Dataset build_dataset(const RoadNetwork& net, const DualGraph& dual, std::vector<PolicyScenario> scenarios,
                      ScenarioSplit split, std::span<const double> base_volume,
                      const std::vector<std::vector<double>>& scenario_volumes);

void write_sample(const GraphSample& sample, const std::filesystem::path& path);
GraphSample read_sample(const std::filesystem::path& path, std::string scenario_id);

/// Directory layout: manifest.json, network.json, samples/sNNNNN.bin.
void save_dataset(const Dataset& dataset, const RoadNetwork& net, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace policygnn

#include "policygnn/surrogate.hpp"

namespace policygnn {

Surrogate::Surrogate(RoadNetwork network, std::vector<double> base_volume, Checkpoint checkpoint)
    : network_(std::move(network)),
      dual_(build_dual(network_)),
      base_(std::move(base_volume)),
      checkpoint_(std::move(checkpoint)) {
  if (base_.size() != network_.edges().size()) throw DatasetError("base volumes do not cover every edge");
  if (checkpoint_.scaler.feature_spec_version != kFeatureSpecVersion) {
    throw CheckpointError("checkpoint scaler feature spec version does not match this build");
  }
  if (checkpoint_.model.config().input_dim != kFeatureDim) {
    throw CheckpointError("checkpoint model input width does not match the feature layout");
  }
}

Surrogate::Prediction Surrogate::predict(const PolicyScenario& scenario) const {
  // Targets are irrelevant here; base volumes stand in for scenario volumes.
  const GraphSample sample = build_sample(network_, dual_, scenario, base_, base_);
  const nn::GraphInput input = to_graph_input(sample, checkpoint_.scaler);
  const nn::Vector standardized = checkpoint_.model.predict(input);
  const auto delta_dual =
      inverse_transform_target(std::span<const double>(standardized.data(), static_cast<std::size_t>(standardized.size())),
                               checkpoint_.scaler);

  Prediction p;
  p.delta.assign(network_.edges().size(), 0.0);
  p.percent.assign(network_.edges().size(), std::nullopt);
  for (std::size_t i = 0; i < dual_.size(); ++i) p.delta[dual_.nodes[i].edge_index] = delta_dual[i];
  for (std::size_t e = 0; e < p.delta.size(); ++e) {
    if (base_[e] != 0.0) p.percent[e] = 100.0 * p.delta[e] / base_[e];
  }
  return p;
}

std::vector<metrics::EdgeView> edge_views(const RoadNetwork& net, const PolicyScenario& scenario) {
  const auto reduction = reduction_per_edge(net, scenario);
  std::vector<metrics::EdgeView> out;
  out.reserve(net.edges().size());
  for (std::size_t e = 0; e < net.edges().size(); ++e) {
    const Edge& edge = net.edges()[e];
    out.push_back({edge.highway_class, reduction[e] > 0.0, edge.district.value_or(""), edge.length});
  }
  return out;
}

std::vector<double> labels_by_edge(const RoadNetwork& net, const DualGraph& dual, const GraphSample& sample) {
  if (sample.num_nodes != dual.size()) throw DatasetError("sample does not match the dual graph");
  std::vector<double> y(net.edges().size(), 0.0);
  for (std::size_t i = 0; i < dual.size(); ++i) y[dual.nodes[i].edge_index] = static_cast<double>(sample.targets[i]);
  return y;
}

}  // namespace policygnn

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "policygnn/checkpoint.hpp"
#include "policygnn/dataset.hpp"
#include "policygnn/metrics.hpp"
#include "policygnn/policy.hpp"
#include "policygnn/road_network.hpp"

namespace policygnn {

/// What-if predictor: a trained checkpoint bound to a network and its base
/// volumes. Immutable after construction; `predict` may run concurrently.
class Surrogate {
public:
  Surrogate(RoadNetwork network, std::vector<double> base_volume, Checkpoint checkpoint);

  struct Prediction {
    std::vector<double> delta;                   // veh/h per road edge, declaration order
    std::vector<std::optional<double>> percent;  // 100 * delta / base; empty where base == 0
  };

  /// One forward pass. Loop edges (absent from the dual graph) predict 0.
  Prediction predict(const PolicyScenario& scenario) const;

  const RoadNetwork& network() const { return network_; }
  const DualGraph& dual() const { return dual_; }
  const std::vector<double>& base_volume() const { return base_; }
  const std::string& checkpoint_id() const { return checkpoint_.id; }
  const Checkpoint& checkpoint() const { return checkpoint_; }

private:
  RoadNetwork network_;
  DualGraph dual_;
  std::vector<double> base_;
  Checkpoint checkpoint_;
};

/// Per-edge attributes for metric filters under `scenario` (edge declaration order).
std::vector<metrics::EdgeView> edge_views(const RoadNetwork& net, const PolicyScenario& scenario);

/// Labels of a dataset sample spread back onto road edges (dual order -> edge order).
std::vector<double> labels_by_edge(const RoadNetwork& net, const DualGraph& dual, const GraphSample& sample);

}  // namespace policygnn

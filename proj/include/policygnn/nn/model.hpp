#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/nn/tape.hpp"

namespace policygnn::nn {

struct ModelConfig {
  std::size_t input_dim = 9;
  std::size_t position_dim = 2;
  std::size_t local_width = 256;
  std::vector<std::size_t> global_widths = {256, 512, 256, 512};
  std::vector<std::size_t> gat_widths = {512, 512, 256, 128, 64};
  std::size_t heads = 1;  // per GAT layer; heads are concatenated
  Aggregation aggregation = Aggregation::max;
  double negative_slope = 0.2;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// Inputs for one graph: standardized node features, node positions for the
/// relative-offset channel, and the message layout (self-loops included).
struct GraphInput {
  Matrix features;
  Matrix positions;
  MessageGraph graph;
};

struct AttentionTrace {
  std::vector<std::vector<double>> per_layer;  // per layer, per head concatenated
};

/// PointNet-style convolution, a stack of graph attention layers, and a
/// linear head producing one value per node:
///
///   h_i = global( agg_{j in N(i) + i} local([x_j, p_j - p_i]) )
///   h   = relu(gat_k(...relu(gat_1(h))))
///   y   = head(h)
///
/// ReLU follows the local transform, every global layer, and every GAT layer.
class GnnModel {
public:
  GnnModel() = default;
  explicit GnnModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  /// Xavier-normal for linear and attention weights, Kaiming-normal for the
  /// PointNet-style transforms, zero biases. Deterministic per seed.
  void init(std::uint64_t seed);

  /// Records the forward pass on `tape`; returns the (N, 1) prediction.
  Var forward(Tape& tape, const GraphInput& input, AttentionTrace* trace = nullptr);
  /// Evaluation-only forward on an immutable model. Safe to call concurrently.
  Vector predict(const GraphInput& input, AttentionTrace* trace = nullptr) const;

  std::size_t count_parameters() const;
  void zero_grad();

  /// Index of each parameter by name; used by checkpoint restore.
  Parameter& parameter(const std::string& name);

  /// One row per parameter tensor (name, shape, count) plus the total.
  nlohmann::json parameter_table() const;

private:
  Var build(Tape& tape, const GraphInput& input, AttentionTrace* trace,
            const std::function<Var(std::size_t)>& param) const;

  struct LinearRef {
    std::size_t weight;
    std::size_t bias;
  };
  struct GatRef {
    std::vector<std::size_t> weight;  // per head
    std::vector<std::size_t> att_src;
    std::vector<std::size_t> att_dst;
    std::size_t bias;
  };

  std::size_t add_param(std::string name, std::size_t rows, std::size_t cols);

  ModelConfig config_;
  std::vector<Parameter> params_;
  LinearRef local_{};
  std::vector<LinearRef> global_;
  std::vector<GatRef> gat_;
  LinearRef head_{};
  std::vector<bool> kaiming_;  // per parameter
};

}  // namespace policygnn::nn

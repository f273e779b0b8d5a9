#include "policygnn/nn/model.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace policygnn::nn {

namespace {

std::string aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::max: return "max";
    case Aggregation::sum: return "sum";
    case Aggregation::mean: return "mean";
  }
  return "max";
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "max") return Aggregation::max;
  if (s == "sum") return Aggregation::sum;
  if (s == "mean") return Aggregation::mean;
  throw NnError("unknown aggregation '" + s + "'");
}

}  // namespace

nlohmann::json ModelConfig::to_json() const {
  return {{"input_dim", input_dim},         {"position_dim", position_dim},
          {"local_width", local_width},     {"global_widths", global_widths},
          {"gat_widths", gat_widths},       {"heads", heads},
          {"aggregation", aggregation_name(aggregation)}, {"negative_slope", negative_slope}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.position_dim = j.value("position_dim", c.position_dim);
  c.local_width = j.value("local_width", c.local_width);
  c.global_widths = j.value("global_widths", c.global_widths);
  c.gat_widths = j.value("gat_widths", c.gat_widths);
  c.heads = j.value("heads", c.heads);
  c.aggregation = parse_aggregation(j.value("aggregation", std::string("max")));
  c.negative_slope = j.value("negative_slope", c.negative_slope);
  return c;
}

std::size_t GnnModel::add_param(std::string name, std::size_t rows, std::size_t cols) {
  params_.emplace_back(std::move(name), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  kaiming_.push_back(false);
  return params_.size() - 1;
}

GnnModel::GnnModel(ModelConfig config) : config_(std::move(config)) {
  if (config_.input_dim == 0 || config_.local_width == 0) throw NnError("model widths must be positive");
  if (config_.heads == 0) throw NnError("heads must be at least 1");

  local_.weight = add_param("conv.local.weight", config_.local_width, config_.input_dim + config_.position_dim);
  local_.bias = add_param("conv.local.bias", 1, config_.local_width);
  kaiming_[local_.weight] = true;

  std::size_t width = config_.local_width;
  for (std::size_t l = 0; l < config_.global_widths.size(); ++l) {
    const std::string prefix = "conv.global." + std::to_string(l);
    LinearRef ref{add_param(prefix + ".weight", config_.global_widths[l], width), add_param(prefix + ".bias", 1, config_.global_widths[l])};
    kaiming_[ref.weight] = true;
    global_.push_back(ref);
    width = config_.global_widths[l];
  }

  for (std::size_t l = 0; l < config_.gat_widths.size(); ++l) {
    const std::size_t out = config_.gat_widths[l];
    if (out % config_.heads != 0) throw NnError("GAT width " + std::to_string(out) + " not divisible by head count");
    const std::size_t per_head = out / config_.heads;
    const std::string prefix = "gat." + std::to_string(l);
    GatRef ref;
    for (std::size_t h = 0; h < config_.heads; ++h) {
      const std::string hp = config_.heads == 1 ? prefix : prefix + ".head" + std::to_string(h);
      ref.weight.push_back(add_param(hp + ".weight", per_head, width));
      ref.att_src.push_back(add_param(hp + ".att_src", 1, per_head));
      ref.att_dst.push_back(add_param(hp + ".att_dst", 1, per_head));
    }
    ref.bias = add_param(prefix + ".bias", 1, out);
    gat_.push_back(std::move(ref));
    width = out;
  }

  head_.weight = add_param("head.weight", 1, width);
  head_.bias = add_param("head.bias", 1, 1);
}

void GnnModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = params_[i];
    if (p.value.rows() == 1 && p.name.ends_with(".bias")) {
      p.value.setZero();
      continue;
    }
    // Weights are (fan_out, fan_in); attention vectors are (1, fan_in).
    const auto fan_out = static_cast<double>(p.value.rows());
    const auto fan_in = static_cast<double>(p.value.cols());
    const double stddev = kaiming_[i] ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = normal(rng);
  }
  zero_grad();
}

Var GnnModel::forward(Tape& tape, const GraphInput& input, AttentionTrace* trace) {
  return build(tape, input, trace, [&](std::size_t i) { return tape.parameter(params_[i]); });
}

Vector GnnModel::predict(const GraphInput& input, AttentionTrace* trace) const {
  Tape tape(false);
  const Var out = build(tape, input, trace, [&](std::size_t i) { return tape.parameter(std::as_const(params_[i])); });
  return tape.value(out).col(0);
}

Var GnnModel::build(Tape& tape, const GraphInput& input, AttentionTrace* trace,
                    const std::function<Var(std::size_t)>& param) const {
  if (static_cast<std::size_t>(input.features.cols()) != config_.input_dim) {
    throw NnError("feature width " + std::to_string(input.features.cols()) + " does not match model input width " +
                  std::to_string(config_.input_dim));
  }
  if (static_cast<std::size_t>(input.positions.cols()) != config_.position_dim) {
    throw NnError("position width does not match model");
  }
  if (input.features.rows() != input.positions.rows() ||
      static_cast<std::size_t>(input.features.rows()) != input.graph.num_nodes) {
    throw NnError("node count mismatch between features, positions and graph");
  }
  if (trace) trace->per_layer.clear();

  Var x = tape.constant(input.features);
  Var msg = tape.relative_messages(x, input.positions, input.graph);
  Var h = tape.relu(tape.linear(msg, param(local_.weight), param(local_.bias)));
  h = tape.aggregate(h, input.graph, config_.aggregation);
  for (const auto& layer : global_) {
    h = tape.relu(tape.linear(h, param(layer.weight), param(layer.bias)));
  }

  for (const auto& layer : gat_) {
    std::vector<Var> heads;
    std::vector<double> alpha_all;
    for (std::size_t k = 0; k < layer.weight.size(); ++k) {
      Var z = tape.linear(h, param(layer.weight[k]));
      std::vector<double> alpha;
      heads.push_back(tape.attention(z, param(layer.att_src[k]), param(layer.att_dst[k]), input.graph,
                                     config_.negative_slope, trace ? &alpha : nullptr));
      if (trace) alpha_all.insert(alpha_all.end(), alpha.begin(), alpha.end());
    }
    Var joined = heads.size() == 1 ? heads.front() : tape.concat_cols(heads);
    h = tape.relu(tape.add_bias(joined, param(layer.bias)));
    if (trace) trace->per_layer.push_back(std::move(alpha_all));
  }
  return tape.linear(h, param(head_.weight), param(head_.bias));
}

std::size_t GnnModel::count_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void GnnModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Parameter& GnnModel::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw NnError("no parameter named '" + name + "'");
}

nlohmann::json GnnModel::parameter_table() const {
  auto rows = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& p : params_) {
    const auto n = static_cast<std::size_t>(p.value.size());
    total += n;
    rows.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"count", n}});
  }
  return {{"parameters", rows}, {"total", total}};
}

}  // namespace policygnn::nn

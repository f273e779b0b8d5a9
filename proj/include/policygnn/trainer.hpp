#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/dataset.hpp"
#include "policygnn/nn/model.hpp"

namespace policygnn {

class TrainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int max_epochs = 2000;
  int patience = 50;
  std::size_t batch_size = 8;
  std::size_t accumulation_every = 3;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double peak_lr = 1e-3;
  std::int64_t warmup_steps = 20000;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double min_improvement = 1e-6;  // absolute drop in validation MSE that counts
  std::optional<double> fixed_lr;  // bypasses the schedule
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Optimizer steps over the whole run: max_epochs * ceil(n_train / batch) / accumulation_every.
std::int64_t total_steps(const TrainConfig& config, std::size_t n_train);

/// Linear warmup to peak_lr, then cosine decay to 0 at total_steps.
double lr_at(std::int64_t step, const TrainConfig& config, std::int64_t total_steps);

/// AdamW with decoupled weight decay: p <- p - lr * (wd * p + m_hat / (sqrt(v_hat) + eps)).
class AdamW {
public:
  AdamW(double beta1, double beta2, double eps, double weight_decay)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  void step(std::vector<nn::Parameter>& params, double lr);
  std::int64_t steps() const { return t_; }

private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::int64_t t_ = 0;
  std::vector<nn::Matrix> m_;
  std::vector<nn::Matrix> v_;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::vector<nn::Parameter>& params, double max_norm);

/// A sample ready for the model: standardized inputs and targets.
struct PreparedSample {
  nn::GraphInput input;
  nn::Matrix target;  // N x 1, standardized
};

PreparedSample prepare(const GraphSample& sample, const Scaler& scaler);

/// Adds weight * d(MSE_s)/d(theta) for each sample into the parameter
/// gradients; returns the mean per-sample MSE.
double accumulate_gradients(nn::GnnModel& model, std::span<const PreparedSample* const> samples, double weight);

struct ValidationResult {
  double mse = 0.0;
  double r2 = 0.0;
};

/// MSE and R^2 pooled over every node of every sample (standardized units).
ValidationResult validate(const nn::GnnModel& model, std::span<const PreparedSample* const> samples);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_r2 = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  bool best = false;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::string stop_reason;

  /// epoch,train_mse,val_mse,val_r2,lr (wall-clock excluded so reruns compare equal).
  std::string to_csv() const;
};

struct TrainResult {
  nn::GnnModel best;
  RunLog log;
  std::int64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training on the dataset's train split with early stopping on
/// validation MSE. The best model is returned as parameters at the best epoch.
TrainResult train(nn::GnnModel model, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace policygnn

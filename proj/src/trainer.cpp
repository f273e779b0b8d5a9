#include "policygnn/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "policygnn/metrics.hpp"

namespace policygnn {

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"max_epochs", max_epochs},
                      {"patience", patience},
                      {"batch_size", batch_size},
                      {"accumulation_every", accumulation_every},
                      {"clip_norm", clip_norm},
                      {"peak_lr", peak_lr},
                      {"warmup_steps", warmup_steps},
                      {"weight_decay", weight_decay},
                      {"beta1", beta1},
                      {"beta2", beta2},
                      {"eps", eps},
                      {"min_improvement", min_improvement},
                      {"seed", seed}};
  if (fixed_lr) j["fixed_lr"] = *fixed_lr;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.accumulation_every = j.value("accumulation_every", c.accumulation_every);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.peak_lr = j.value("peak_lr", c.peak_lr);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.min_improvement = j.value("min_improvement", c.min_improvement);
  c.seed = j.value("seed", c.seed);
  if (j.contains("fixed_lr") && !j["fixed_lr"].is_null()) c.fixed_lr = j["fixed_lr"].get<double>();
  if (c.max_epochs < 1 || c.patience < 1 || c.batch_size < 1 || c.accumulation_every < 1 || c.peak_lr < 0.0 ||
      c.warmup_steps < 0 || c.weight_decay < 0.0) {
    throw TrainError("train config: values must be positive");
  }
  return c;
}

std::int64_t total_steps(const TrainConfig& config, std::size_t n_train) {
  const auto batches = static_cast<std::int64_t>((n_train + config.batch_size - 1) / config.batch_size);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(config.max_epochs) * batches /
                                       static_cast<std::int64_t>(config.accumulation_every));
}

double lr_at(std::int64_t step, const TrainConfig& config, std::int64_t total) {
  if (config.fixed_lr) return *config.fixed_lr;
  if (step <= config.warmup_steps) {
    if (config.warmup_steps == 0) return config.peak_lr;
    return config.peak_lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  }
  if (total <= config.warmup_steps) return config.peak_lr;
  const double progress = std::min(1.0, static_cast<double>(step - config.warmup_steps) /
                                            static_cast<double>(total - config.warmup_steps));
  return config.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void AdamW::step(std::vector<nn::Parameter>& params, double lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value *= 1.0 - lr * weight_decay_;
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

double clip_grad_norm(std::vector<nn::Parameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params) p.grad *= factor;
  }
  return norm;
}

PreparedSample prepare(const GraphSample& sample, const Scaler& scaler) {
  auto st = transform(sample, scaler);
  return {{std::move(st.features), std::move(st.positions), nn::MessageGraph::build(sample.num_nodes, sample.edges, true)},
          std::move(st.targets)};
}

double accumulate_gradients(nn::GnnModel& model, std::span<const PreparedSample* const> samples, double weight) {
  double loss_sum = 0.0;
  for (const PreparedSample* s : samples) {
    nn::Tape tape;
    const nn::Var pred = model.forward(tape, s->input);
    const nn::Var loss = tape.scale(tape.mse(pred, s->target), weight);
    const double value = tape.value(loss)(0, 0) / weight;
    if (!std::isfinite(value)) throw TrainError("training loss is not finite");
    tape.backward(loss);
    loss_sum += value;
  }
  return samples.empty() ? 0.0 : loss_sum / static_cast<double>(samples.size());
}

ValidationResult validate(const nn::GnnModel& model, std::span<const PreparedSample* const> samples) {
  if (samples.empty()) throw TrainError("validation set is empty");
  std::vector<double> y;
  std::vector<double> yhat;
  for (const PreparedSample* s : samples) {
    const nn::Vector pred = model.predict(s->input);
    y.insert(y.end(), s->target.data(), s->target.data() + s->target.size());
    yhat.insert(yhat.end(), pred.data(), pred.data() + pred.size());
  }
  ValidationResult r;
  r.mse = metrics::mse(y, yhat);
  r.r2 = metrics::baseline_mse(y) > 0.0 ? metrics::r_squared(y, yhat) : 0.0;
  return r;
}

std::string RunLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,train_mse,val_mse,val_r2,lr\n";
  char buf[64];
  auto num = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  };
  for (const auto& e : epochs) {
    out << e.epoch << ',' << num(e.train_mse) << ',' << num(e.val_mse) << ',' << num(e.val_r2) << ',' << num(e.lr)
        << '\n';
  }
  return out.str();
}

TrainResult train(nn::GnnModel model, const Dataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (dataset.split.train.empty()) throw TrainError("training split is empty");
  if (dataset.split.validation.empty()) throw TrainError("validation split is empty");
#if defined(__GLIBC__)
  // Activations are a few MB each; keep them off mmap so every step does not
  // fault fresh pages in.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif

  std::vector<PreparedSample> train_set;
  std::vector<PreparedSample> val_set;
  for (const auto& id : dataset.split.train) train_set.push_back(prepare(dataset.samples[dataset.index_of(id)], dataset.scaler));
  for (const auto& id : dataset.split.validation) val_set.push_back(prepare(dataset.samples[dataset.index_of(id)], dataset.scaler));
  std::vector<const PreparedSample*> val_ptrs;
  for (const auto& s : val_set) val_ptrs.push_back(&s);

  const std::int64_t total = total_steps(config, train_set.size());
  AdamW optimizer(config.beta1, config.beta2, config.eps, config.weight_decay);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}, 0};
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  model.zero_grad();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);

    // Mini-batches are grouped into accumulation windows; a window's gradient
    // is the average of its mini-batch mean losses.
    const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
    double train_loss = 0.0;
    double lr = 0.0;
    for (std::size_t window = 0; window < n_batches; window += config.accumulation_every) {
      const std::size_t window_end = std::min(n_batches, window + config.accumulation_every);
      const double batches_in_window = static_cast<double>(window_end - window);
      for (std::size_t b = window; b < window_end; ++b) {
        std::vector<const PreparedSample*> batch;
        for (std::size_t k = b * config.batch_size; k < std::min(order.size(), (b + 1) * config.batch_size); ++k) {
          batch.push_back(&train_set[order[k]]);
        }
        const double weight = 1.0 / (static_cast<double>(batch.size()) * batches_in_window);
        train_loss += accumulate_gradients(model, batch, weight) * static_cast<double>(batch.size());
      }
      clip_grad_norm(model.parameters(), config.clip_norm);
      lr = lr_at(optimizer.steps() + 1, config, total);
      optimizer.step(model.parameters(), lr);
      model.zero_grad();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = train_loss / static_cast<double>(order.size());
    const auto val = validate(model, val_ptrs);
    rec.val_mse = val.mse;
    rec.val_r2 = val.r2;
    rec.lr = lr;
    if (!std::isfinite(rec.train_mse)) throw TrainError("training loss is not finite at epoch " + std::to_string(epoch));
    if (val.mse < best_val - config.min_improvement) {
      best_val = val.mse;
      since_best = 0;
      rec.best = true;
      result.best = model;
      result.log.best_epoch = epoch;
    } else {
      ++since_best;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (since_best >= config.patience) {
      result.log.stop_reason = "early stopping: no improvement for " + std::to_string(config.patience) + " epochs";
      break;
    }
  }
  if (result.log.stop_reason.empty()) result.log.stop_reason = "reached max_epochs";
  result.steps = optimizer.steps();
  result.best.zero_grad();
  return result;
}

}  // namespace policygnn

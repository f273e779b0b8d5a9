#include <doctest.h>

#include "nn_support.hpp"
#include "policygnn/dataset.hpp"
#include "policygnn/trainer.hpp"

using namespace policygnn;
using namespace policygnn::nn;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.local_width = 8;
  c.global_widths = {8};
  c.gat_widths = {8};
  return c;
}

// Grid scenarios whose labels are a linear function of the features.
Dataset grid_dataset(std::size_t n_train, std::size_t n_val = 1) {
  const auto net = load_network(testing::fixture("grid4.json"));
  const auto dual = build_dual(net);
  const std::vector<double> base{100, 90, 40, 30, 70, 60, 20, 10};
  std::vector<PolicyScenario> scenarios;
  std::vector<std::vector<double>> volumes;
  ScenarioSplit split;
  for (std::size_t k = 0; k < n_train + n_val; ++k) {
    PolicyScenario p;
    p.id = "s" + std::to_string(k);
    p.districts = {k % 2 ? "east" : "west"};
    p.reduction = 0.2 + 0.1 * double(k);
    const auto red = reduction_per_edge(net, p);
    std::vector<double> v(base.size());
    for (std::size_t e = 0; e < v.size(); ++e) v[e] = base[e] * (1.1 - red[e]) + 0.01 * net.edges()[e].capacity;
    scenarios.push_back(p);
    volumes.push_back(v);
    (k < n_train ? split.train : split.validation).push_back(p.id);
  }
  return build_dataset(net, dual, scenarios, split, base, volumes);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  const std::int64_t total = 1'000'000;
  CHECK(lr_at(0, c, total) == 0.0);
  CHECK(lr_at(10'000, c, total) == doctest::Approx(0.0005).epsilon(1e-12));
  CHECK(lr_at(20'000, c, total) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(lr_at(total, c, total) == doctest::Approx(0.0).scale(1.0));
  const double mid = lr_at(20'000 + (total - 20'000) / 2, c, total);
  CHECK(mid == doctest::Approx(0.0005).epsilon(1e-9));
  for (std::int64_t s = 20'000; s < total; s += 9'973) CHECK(lr_at(s + 9'973, c, total) <= lr_at(s, c, total));
  c.fixed_lr = 0.25;
  CHECK(lr_at(3, c, total) == 0.25);
}

TEST_CASE("total steps") {
  TrainConfig c;
  c.max_epochs = 10;
  c.batch_size = 8;
  c.accumulation_every = 3;
  CHECK(total_steps(c, 160) == 10 * 20 / 3);
  CHECK(total_steps(c, 161) == 10 * 21 / 3);
}

TEST_CASE("AdamW first two steps match hand derivation") {
  std::vector<Parameter> params(1, Parameter("p", 1, 1));
  params[0].value(0, 0) = 1.0;
  AdamW opt(0.9, 0.999, 1e-8, 0.01);
  params[0].grad(0, 0) = 0.5;
  opt.step(params, 0.1);
  CHECK(params[0].value(0, 0) == doctest::Approx(0.89900000199999996).epsilon(1e-14));
  params[0].grad(0, 0) = -0.25;
  opt.step(params, 0.1);
  CHECK(params[0].value(0, 0) == doctest::Approx(0.87146729870584616).epsilon(1e-14));
  CHECK(opt.steps() == 2);
}

TEST_CASE("gradient clipping") {
  std::mt19937_64 rng(3);
  GnnModel m(tiny_config());
  m.init(3);
  const auto in = testing::ring_input(rng);
  const Matrix target = testing::random_matrix(rng, 10, 1);
  m.zero_grad();
  Tape t;
  t.backward(t.scale(t.mse(m.forward(t, in), target), 1e6));
  const double before = clip_grad_norm(m.parameters(), 1.0);
  CHECK(before > 1.0);
  double sq = 0.0;
  for (const auto& p : m.parameters()) sq += p.grad.squaredNorm();
  CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-9);
  // Already inside the ball: untouched.
  const auto snapshot = m.parameters()[0].grad;
  CHECK(clip_grad_norm(m.parameters(), 10.0) == doctest::Approx(1.0));
  CHECK(m.parameters()[0].grad == snapshot);
}

TEST_CASE("accumulated gradient equals the mean of per-sample gradients") {
  const auto ds = grid_dataset(3);
  std::vector<PreparedSample> prepared;
  for (const auto& s : ds.samples) prepared.push_back(prepare(s, ds.scaler));
  GnnModel m(tiny_config());
  m.init(5);
  std::vector<Matrix> separate;
  for (std::size_t i = 0; i < 2; ++i) {
    m.zero_grad();
    const PreparedSample* one[] = {&prepared[i]};
    accumulate_gradients(m, one, 1.0);
    for (std::size_t k = 0; k < m.parameters().size(); ++k) {
      if (i == 0) separate.push_back(m.parameters()[k].grad);
      else separate[k] += m.parameters()[k].grad;
    }
  }
  m.zero_grad();
  const PreparedSample* both[] = {&prepared[0], &prepared[1]};
  accumulate_gradients(m, both, 0.5);
  for (std::size_t k = 0; k < m.parameters().size(); ++k) {
    CHECK((m.parameters()[k].grad - 0.5 * separate[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("batch-with-accumulation and plain batches give the same update") {
  const auto ds = grid_dataset(4);
  TrainConfig a;
  a.max_epochs = 1;
  a.fixed_lr = 1e-3;
  a.batch_size = 2;
  a.accumulation_every = 2;
  TrainConfig b = a;
  b.batch_size = 4;
  b.accumulation_every = 1;
  GnnModel m(tiny_config());
  m.init(6);
  const auto ra = train(m, ds, a);
  const auto rb = train(m, ds, b);
  CHECK(ra.steps == 1);
  CHECK(rb.steps == 1);
  for (std::size_t k = 0; k < m.parameters().size(); ++k) {
    CHECK((ra.best.parameters()[k].value - rb.best.parameters()[k].value).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("training loss decreases on a single linear-target sample") {
  const auto ds = grid_dataset(1);
  TrainConfig c;
  c.max_epochs = 10;
  c.patience = 100;
  c.batch_size = 1;
  c.accumulation_every = 1;
  c.fixed_lr = 1e-3;
  GnnModel m(tiny_config());
  m.init(2);
  const auto r = train(m, ds, c);
  REQUIRE(r.log.epochs.size() == 10);
  for (std::size_t k = 1; k < r.log.epochs.size(); ++k) {
    CHECK(r.log.epochs[k].train_mse < r.log.epochs[k - 1].train_mse);
  }
}

TEST_CASE("zero learning rate stops after patience runs out") {
  const auto ds = grid_dataset(2);
  TrainConfig c;
  c.max_epochs = 50;
  c.patience = 1;
  c.fixed_lr = 0.0;
  GnnModel m(tiny_config());
  m.init(1);
  const auto r = train(m, ds, c);
  CHECK(r.log.epochs.size() == 2);
  CHECK(r.log.best_epoch == 1);
  CHECK(r.log.stop_reason.find("early stopping") != std::string::npos);
}

TEST_CASE("training is reproducible and the best epoch is returned") {
  const auto ds = grid_dataset(5, 2);
  TrainConfig c;
  c.max_epochs = 6;
  c.batch_size = 2;
  c.accumulation_every = 2;
  c.warmup_steps = 2;
  c.seed = 9;
  GnnModel m(tiny_config());
  m.init(4);
  const auto a = train(m, ds, c);
  const auto b = train(m, ds, c);
  CHECK(a.log.to_csv() == b.log.to_csv());
  for (std::size_t k = 0; k < m.parameters().size(); ++k) {
    CHECK(a.best.parameters()[k].value == b.best.parameters()[k].value);
  }
  std::vector<const PreparedSample*> val;
  std::vector<PreparedSample> prepared;
  prepared.reserve(ds.split.validation.size());
  for (const auto& id : ds.split.validation) prepared.push_back(prepare(ds.samples[ds.index_of(id)], ds.scaler));
  for (const auto& p : prepared) val.push_back(&p);
  const auto best = a.log.epochs[std::size_t(a.log.best_epoch - 1)];
  CHECK(validate(a.best, val).mse == doctest::Approx(best.val_mse).epsilon(1e-12));
  for (const auto& e : a.log.epochs) CHECK(e.val_mse >= best.val_mse);
  CHECK(a.log.to_csv().starts_with("epoch,train_mse,val_mse,val_r2,lr\n"));
}

TEST_CASE("config json round trip") {
  TrainConfig c;
  c.max_epochs = 12;
  c.warmup_steps = 30;
  c.fixed_lr = 0.5;
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.max_epochs == 12);
  CHECK(back.warmup_steps == 30);
  CHECK(back.fixed_lr == 0.5);
  CHECK(TrainConfig::from_json(nlohmann::json::object()).peak_lr == 1e-3);
}

}  // TEST_SUITE

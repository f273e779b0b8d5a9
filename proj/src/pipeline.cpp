#include "policygnn/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "policygnn/checkpoint.hpp"
#include "policygnn/dataset.hpp"
#include "policygnn/log.hpp"
#include "policygnn/scenario_gen.hpp"
#include "policygnn/surrogate.hpp"

namespace policygnn::pipeline {

namespace {

// Runs fn(i) for i in [0, n) on `workers` threads. The first exception is
// rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void gen_network(const CityConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const City city = generate_city(config);
  save_network(city.network, out_dir / "network.json");
  write_text(out_dir / "demand.json", demand_to_json(city.demand).dump(1) + "\n");
  log::info("network: " + std::to_string(city.network.nodes().size()) + " nodes, " +
            std::to_string(city.network.edges().size()) + " edges, " +
            std::to_string(city.network.districts().size()) + " districts, " + std::to_string(city.demand.size()) +
            " OD pairs");
}

void gen_scenarios(const fs::path& network_path, const ScenarioOptions& options, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto net = load_network(network_path);
  const auto graph = DistrictGraph::from_network(net);
  const auto scenarios = sample_scenarios(graph, options.count, options.seed, options.include_singletons, options.reduction);
  std::vector<std::string> ids;
  for (const auto& s : scenarios) ids.push_back(s.id);
  const auto split = split_scenarios(ids, options.ratios, options.split_seed);
  save_scenarios(scenarios, out_dir / "scenarios.json");
  auto manifest = split_manifest(split, options.split_seed, scenarios);
  manifest["sampling"] = {{"seed", options.seed},
                          {"requested", options.count},
                          {"include_singletons", options.include_singletons},
                          {"connected_subsets", enumerate_connected_subsets(graph).size()}};
  write_text(out_dir / "split.json", manifest.dump(1) + "\n");
  log::info("scenarios: " + std::to_string(scenarios.size()) + " (train " + std::to_string(split.train.size()) +
            ", validation " + std::to_string(split.validation.size()) + ", test " + std::to_string(split.test.size()) +
            ")");
}

void run_oracle(const fs::path& network_path, const fs::path& demand_path, const OracleConfig& config,
                const fs::path& scenarios_path, const OracleOptions& options, const fs::path& out_dir) {
  if (options.base_seeds < 1) throw OracleError("base_seeds must be at least 1");
  fs::create_directories(out_dir);
  const auto net = load_network(network_path);
  const auto demand = load_demand(demand_path);
  const auto scenarios = load_scenarios(scenarios_path);

  // Base: one run per seed, then a fixed-order mean so the result does not
  // depend on scheduling.
  std::vector<std::vector<double>> per_seed(static_cast<std::size_t>(options.base_seeds));
  parallel_for(per_seed.size(), options.workers, [&](std::size_t s) {
    OracleConfig c = config;
    c.seed = s;
    per_seed[s] = assign(net, demand, c).volume;
  });
  std::vector<double> base(net.edges().size(), 0.0);
  for (const auto& v : per_seed) {
    for (std::size_t e = 0; e < base.size(); ++e) base[e] += v[e];
  }
  for (double& v : base) v /= static_cast<double>(per_seed.size());
  write_volume_csv(out_dir / "base.csv", net, base);

  std::atomic<std::size_t> unconverged{0};
  parallel_for(scenarios.size(), options.workers, [&](std::size_t i) {
    const auto& s = scenarios[i];
    OracleConfig c = config;
    c.seed = scenario_seed(s.id, config.seed);
    const auto result = assign(apply_policy(net, s), demand, c);
    if (!result.converged) ++unconverged;
    write_volume_csv(out_dir / (s.id + ".csv"), net, result.volume);
  });
  nlohmann::json manifest = {{"config", oracle_config_to_json(config)},
                             {"base_seeds", options.base_seeds},
                             {"scenarios", scenarios.size()},
                             {"unconverged", unconverged.load()}};
  write_text(out_dir / "oracle_manifest.json", manifest.dump(1) + "\n");
  if (unconverged > 0) {
    log::warn(std::to_string(unconverged.load()) + " scenario run(s) stopped at max_iter before reaching gap_tol");
  }
}

void build_dataset(const fs::path& network_path, const fs::path& scenarios_path, const fs::path& split_path,
                   const fs::path& volumes_dir, const fs::path& out_dir) {
  const auto net = load_network(network_path);
  const auto dual = build_dual(net);
  auto scenarios = load_scenarios(scenarios_path);
  auto split = split_from_json(read_json(split_path));
  const auto base = read_volume_csv(volumes_dir / "base.csv", net);
  std::vector<std::vector<double>> volumes;
  volumes.reserve(scenarios.size());
  for (const auto& s : scenarios) volumes.push_back(read_volume_csv(volumes_dir / (s.id + ".csv"), net));
  const Dataset ds = policygnn::build_dataset(net, dual, std::move(scenarios), std::move(split), base, volumes);
  save_dataset(ds, net, out_dir);
  // Base volumes travel with the dataset so checkpoints can be served from it.
  fs::copy_file(volumes_dir / "base.csv", out_dir / "base.csv", fs::copy_options::overwrite_existing);
  log::info("dataset: " + std::to_string(ds.samples.size()) + " samples, " + std::to_string(dual.size()) +
            " dual nodes, " + std::to_string(dual.edges.size()) + " dual edges");
}

TrainResult train(const fs::path& dataset_dir, const TrainConfig& config, const nn::ModelConfig& model_config,
                  const fs::path& out_dir, std::uint64_t init_seed, bool verbose) {
  const Dataset ds = load_dataset(dataset_dir);
  nn::GnnModel model(model_config);
  model.init(init_seed);
  auto result = policygnn::train(std::move(model), ds, config, [&](const EpochRecord& r) {
    if (!verbose) return;
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %4d  train %.5f  val %.5f  r2 %+.4f  lr %.3g  %.1fs%s", r.epoch, r.train_mse,
                  r.val_mse, r.val_r2, r.lr, r.seconds, r.best ? "  *" : "");
    log::info(buf);
  });

  fs::create_directories(out_dir);
  const auto& best = result.log.epochs[static_cast<std::size_t>(result.log.best_epoch - 1)];
  nlohmann::json meta = {{"best_epoch", result.log.best_epoch},
                         {"epochs_run", result.log.epochs.size()},
                         {"best_val_mse", best.val_mse},
                         {"best_val_r2", best.val_r2},
                         {"optimizer_steps", result.steps},
                         {"stop_reason", result.log.stop_reason}};
  const std::string id = save_checkpoint(out_dir, result.best, ds.scaler, meta);
  write_text(out_dir / "runlog.csv", result.log.to_csv());

  double subset_size = 0.0;
  for (const auto& s : ds.scenarios) subset_size += static_cast<double>(s.districts.size());
  nlohmann::json run = {{"checkpoint_id", id},
                        {"train_config", config.to_json()},
                        {"model", model_config.to_json()},
                        {"init_seed", init_seed},
                        {"parameter_count", result.best.count_parameters()},
                        {"parameter_table", result.best.parameter_table()},
                        {"scenarios", ds.scenarios.size()},
                        {"mean_subset_size", ds.scenarios.empty() ? 0.0 : subset_size / static_cast<double>(ds.scenarios.size())},
                        {"split_sizes", {ds.split.train.size(), ds.split.validation.size(), ds.split.test.size()}},
                        {"result", meta}};
  write_text(out_dir / "run_manifest.json", run.dump(1) + "\n");
  return result;
}

metrics::EvalReport evaluate(const fs::path& dataset_dir, const fs::path& checkpoint_dir, const std::string& split,
                             bool use_labels_as_predictions) {
  const Dataset ds = load_dataset(dataset_dir);
  auto net = load_network(dataset_dir / "network.json");
  auto base = read_volume_csv(dataset_dir / "base.csv", net);
  const std::vector<std::string>* ids = nullptr;
  if (split == "train") ids = &ds.split.train;
  else if (split == "validation") ids = &ds.split.validation;
  else if (split == "test") ids = &ds.split.test;
  else throw std::runtime_error("unknown split '" + split + "'");

  std::optional<Surrogate> surrogate;
  if (!use_labels_as_predictions) surrogate.emplace(net, base, load_checkpoint(checkpoint_dir));
  const auto dual = build_dual(net);

  std::vector<metrics::ScenarioOutcome> outcomes;
  for (const auto& id : *ids) {
    const auto idx = ds.index_of(id);
    metrics::ScenarioOutcome o;
    o.scenario_id = id;
    o.edges = edge_views(net, ds.scenarios[idx]);
    o.y = labels_by_edge(net, dual, ds.samples[idx]);
    o.yhat = use_labels_as_predictions ? o.y : surrogate->predict(ds.scenarios[idx]).delta;
    outcomes.push_back(std::move(o));
  }
  return metrics::evaluate_subsets(outcomes, metrics::standard_filters());
}

}  // namespace policygnn::pipeline

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "policygnn/log.hpp"
#include "policygnn/pipeline.hpp"
#include "policygnn/service.hpp"

namespace pl = policygnn::pipeline;
namespace fs = std::filesystem;

namespace {

nlohmann::json optional_json(const std::string& path) {
  return path.empty() ? nlohmann::json::object() : pl::read_json(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-network surrogate for road capacity-reduction policies"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print warnings and errors");

  std::string config_path;
  fs::path out_dir;

  auto* gen_network = app.add_subcommand("gen-network", "Generate the synthetic city (network.json, demand.json)");
  gen_network->add_option("--config", config_path, "City config JSON")->check(CLI::ExistingFile);
  gen_network->add_option("--out", out_dir, "Output directory")->required();

  fs::path network_path;
  pl::ScenarioOptions scen;
  auto* gen_scenarios = app.add_subcommand("gen-scenarios", "Sample connected district subsets and split them");
  gen_scenarios->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  gen_scenarios->add_option("--count", scen.count, "Number of scenarios")->capture_default_str();
  gen_scenarios->add_option("--seed", scen.seed, "Sampling seed")->capture_default_str();
  gen_scenarios->add_option("--split-seed", scen.split_seed, "Split seed")->capture_default_str();
  gen_scenarios->add_option("--reduction", scen.reduction, "Capacity reduction")->capture_default_str();
  gen_scenarios->add_flag("!--no-singletons", scen.include_singletons, "Do not force single-district scenarios");
  gen_scenarios->add_option("--out", out_dir)->required();

  fs::path demand_path, scenarios_path;
  pl::OracleOptions oracle_opts;
  auto* run_oracle = app.add_subcommand("run-oracle", "Equilibrium volumes for the base case and every scenario");
  run_oracle->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  run_oracle->add_option("--demand", demand_path)->required()->check(CLI::ExistingFile);
  run_oracle->add_option("--scenarios", scenarios_path)->required()->check(CLI::ExistingFile);
  run_oracle->add_option("--config", config_path, "Oracle config JSON")->check(CLI::ExistingFile);
  run_oracle->add_option("--base-seeds", oracle_opts.base_seeds)->capture_default_str();
  run_oracle->add_option("--workers", oracle_opts.workers)->capture_default_str();
  run_oracle->add_option("--out", out_dir)->required();

  fs::path split_path, volumes_dir;
  auto* build = app.add_subcommand("build-dataset", "Turn oracle volumes into graph samples");
  build->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  build->add_option("--scenarios", scenarios_path)->required()->check(CLI::ExistingFile);
  build->add_option("--split", split_path)->required()->check(CLI::ExistingFile);
  build->add_option("--volumes", volumes_dir)->required()->check(CLI::ExistingDirectory);
  build->add_option("--out", out_dir)->required();

  fs::path dataset_dir;
  auto* train = app.add_subcommand("train", "Train a model and write the best checkpoint");
  train->add_option("--dataset", dataset_dir)->required()->check(CLI::ExistingDirectory);
  train->add_option("--config", config_path, "JSON with optional 'train', 'model', 'init_seed'")
      ->check(CLI::ExistingFile);
  train->add_option("--out", out_dir)->required();

  fs::path checkpoint_dir;
  std::string split = "test";
  std::string csv_path;
  bool perfect = false;
  auto* evaluate = app.add_subcommand("evaluate", "Print the per-subset report for one split");
  evaluate->add_option("--dataset", dataset_dir)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--checkpoint", checkpoint_dir);
  evaluate->add_option("--split", split)->check(CLI::IsMember({"train", "validation", "test"}))->capture_default_str();
  evaluate->add_option("--csv", csv_path, "Also write the report as CSV");
  evaluate->add_flag("--oracle-predictions", perfect, "Score the labels themselves");

  std::string host = "127.0.0.1";
  int port = 8080;
  policygnn::ServiceOptions service_opts;
  auto* serve = app.add_subcommand("serve", "Serve what-if predictions over HTTP");
  serve->add_option("--dataset", dataset_dir, "Directory with network.json and base.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  serve->add_option("--checkpoint", checkpoint_dir)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "Overrides $PORT");
  serve->add_option("--max-edges", service_opts.max_edges)->capture_default_str();
  serve->add_option("--cors-origin", service_opts.cors_origin)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  policygnn::log::set_quiet(quiet);

  try {
    if (*gen_network) {
      pl::gen_network(policygnn::CityConfig::from_json(optional_json(config_path)), out_dir);
    } else if (*gen_scenarios) {
      pl::gen_scenarios(network_path, scen, out_dir);
    } else if (*run_oracle) {
      pl::run_oracle(network_path, demand_path, policygnn::oracle_config_from_json(optional_json(config_path)),
                     scenarios_path, oracle_opts, out_dir);
    } else if (*build) {
      pl::build_dataset(network_path, scenarios_path, split_path, volumes_dir, out_dir);
    } else if (*train) {
      const auto cfg = optional_json(config_path);
      const auto tc = policygnn::TrainConfig::from_json(cfg.value("train", nlohmann::json::object()));
      const auto mc = policygnn::nn::ModelConfig::from_json(cfg.value("model", nlohmann::json::object()));
      const auto result = pl::train(dataset_dir, tc, mc, out_dir, cfg.value("init_seed", std::uint64_t{0}), !quiet);
      std::cout << "best epoch " << result.log.best_epoch << " of " << result.log.epochs.size() << " ("
                << result.log.stop_reason << "), checkpoint in " << out_dir.string() << "\n";
    } else if (*evaluate) {
      if (checkpoint_dir.empty() && !perfect) throw std::runtime_error("--checkpoint is required");
      const auto report = pl::evaluate(dataset_dir, checkpoint_dir, split, perfect);
      std::cout << report.to_text();
      if (!csv_path.empty()) pl::write_text(csv_path, report.to_csv());
    } else if (*serve) {
      if (serve->count("--port") == 0) {
        if (const char* env = std::getenv("PORT")) port = std::stoi(env);
      }
      const policygnn::PolicyService service(policygnn::load_surrogate(dataset_dir, checkpoint_dir), service_opts);
      policygnn::serve(service, host, port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

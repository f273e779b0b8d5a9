#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "policygnn/metrics.hpp"
#include "policygnn/synthetic_city.hpp"
#include "policygnn/trainer.hpp"

// File-level steps behind the command-line tool. Each consumes and produces
// the documented on-disk formats so steps can be rerun independently.
namespace policygnn::pipeline {

namespace fs = std::filesystem;

/// Writes network.json and demand.json into `out_dir`.
void gen_network(const CityConfig& config, const fs::path& out_dir);

struct ScenarioOptions {
  std::size_t count = 200;
  std::uint64_t seed = 1;
  bool include_singletons = true;
  double reduction = 0.5;
  std::array<double, 3> ratios = {0.80, 0.15, 0.05};
  std::uint64_t split_seed = 2;
};

/// Writes scenarios.json and split.json (with summary statistics).
void gen_scenarios(const fs::path& network_path, const ScenarioOptions& options, const fs::path& out_dir);

struct OracleOptions {
  int base_seeds = 50;
  std::size_t workers = 1;
};

/// Writes base.csv (mean over base seeds) and <scenario_id>.csv per scenario.
/// Output is identical for any worker count.
void run_oracle(const fs::path& network_path, const fs::path& demand_path, const OracleConfig& config,
                const fs::path& scenarios_path, const OracleOptions& options, const fs::path& out_dir);

void build_dataset(const fs::path& network_path, const fs::path& scenarios_path, const fs::path& split_path,
                   const fs::path& volumes_dir, const fs::path& out_dir);

/// Trains from scratch and writes the best checkpoint, runlog.csv, and
/// run_manifest.json into `out_dir`.
TrainResult train(const fs::path& dataset_dir, const TrainConfig& config, const nn::ModelConfig& model_config,
                  const fs::path& out_dir, std::uint64_t init_seed, bool verbose = false);

/// Per-subset report for one split ("train", "validation", "test").
/// With `use_labels_as_predictions` the labels themselves are scored.
metrics::EvalReport evaluate(const fs::path& dataset_dir, const fs::path& checkpoint_dir, const std::string& split,
                             bool use_labels_as_predictions = false);

nlohmann::json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace policygnn::pipeline

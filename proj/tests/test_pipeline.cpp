#include <doctest.h>

#include <fstream>
#include <sstream>

#include "policygnn/pipeline.hpp"
#include "support.hpp"

using namespace policygnn;
namespace pl = policygnn::pipeline;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CityConfig small_city() {
  CityConfig c;
  c.columns = 6;
  c.rows = 6;
  c.district_columns = 2;
  c.district_rows = 2;
  c.trips_per_zone = 300;
  return c;
}

// Network, scenarios and oracle volumes for the small city under `root`.
void prepare_small(const std::filesystem::path& root, std::size_t workers) {
  pl::gen_network(small_city(), root);
  pl::ScenarioOptions so;
  so.count = 10;
  so.ratios = {0.6, 0.2, 0.2};
  pl::gen_scenarios(root / "network.json", so, root);
  OracleConfig oc;
  oc.noise_sigma = 0.05;
  pl::OracleOptions oo;
  oo.base_seeds = 3;
  oo.workers = workers;
  pl::run_oracle(root / "network.json", root / "demand.json", oc, root / "scenarios.json", oo, root / "volumes");
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("oracle output does not depend on the worker count") {
  const auto one = testing::scratch_dir("pipe_w1");
  const auto four = testing::scratch_dir("pipe_w4");
  prepare_small(one, 1);
  prepare_small(four, 4);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(one / "volumes")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    CHECK(slurp(entry.path()) == slurp(four / "volumes" / entry.path().filename()));
  }
  // 10 sampled subsets plus the singletons they miss, and base.
  const auto scenarios = load_scenarios(one / "scenarios.json");
  CHECK(scenarios.size() >= 10);
  CHECK(scenarios.size() <= 13);  // connected subsets of a 4-cycle
  CHECK(files == scenarios.size() + 1);
}

TEST_CASE("small city end to end") {
  const auto root = testing::scratch_dir("pipe_e2e");
  prepare_small(root, 2);
  const auto split = pl::read_json(root / "split.json");
  CHECK(split.at("summary").contains("mean_subset_size"));
  pl::build_dataset(root / "network.json", root / "scenarios.json", root / "split.json", root / "volumes", root / "ds");
  CHECK(std::filesystem::exists(root / "ds" / "base.csv"));

  const auto perfect = pl::evaluate(root / "ds", "", "test", true);
  REQUIRE(perfect.rows.size() == 10);
  for (const auto& row : perfect.rows) {
    if (row.scenarios > 0) CHECK(row.r2 == 1.0);
    if (row.scenarios > 0) CHECK(row.model_mse == 0.0);
  }

  TrainConfig tc;
  tc.max_epochs = 2;
  tc.warmup_steps = 1;
  tc.batch_size = 2;
  tc.accumulation_every = 1;
  nn::ModelConfig mc;
  mc.local_width = 8;
  mc.global_widths = {8};
  mc.gat_widths = {8, 4};
  const auto result = pl::train(root / "ds", tc, mc, root / "ckpt", 3);
  CHECK(result.log.epochs.size() == 2);
  const auto run = pl::read_json(root / "ckpt" / "run_manifest.json");
  CHECK(run.at("parameter_count") == result.best.count_parameters());
  CHECK(run.at("parameter_table").at("total") == result.best.count_parameters());
  CHECK(run.contains("mean_subset_size"));
  CHECK(std::filesystem::exists(root / "ckpt" / "runlog.csv"));

  const auto report = pl::evaluate(root / "ds", root / "ckpt", "test");
  REQUIRE(report.rows.size() == 10);
  CHECK(report.rows[0].scenarios == 2);
  CHECK_THROWS(pl::evaluate(root / "ds", root / "ckpt", "holdout"));
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "actugen/error.hpp"
#include "actugen/runner.hpp"
#include "actugen/surrogate.hpp"

using namespace actugen;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("actugen_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kTiny = R"({
  "version": 1,
  "surrogate_rows": 3000,
  "n_experiments": 2,
  "methods": ["training", "mice"],
  "parts": 3,
  "mice": {"iterations": 1, "forest": {"n_trees": 3}},
  "stepwise": false,
  "seed": 11
})";

}  // namespace

TEST_CASE("config parsing") {
  const auto c = ExperimentConfig::from_json_text(kTiny);
  CHECK(c.surrogate_rows == 3000);
  CHECK(c.methods.size() == 2);
  CHECK(c.methods[0].source == MethodSpec::Source::training);
  CHECK(c.methods[1].generator == GeneratorKind::mice_method);
  CHECK(c.mice.forest.n_trees == 3);
  CHECK(c.parts == 3);
  CHECK_FALSE(c.stepwise);

  const auto round = ExperimentConfig::from_json_text(c.to_json_text());
  CHECK(round.to_json_text() == c.to_json_text());

  const ExperimentConfig d;
  CHECK(d.methods.size() == 4);
  CHECK(d.n_experiments == 5);
  CHECK(d.parts == 5);

  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"version": 1, "sed": 3})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"seed": 3})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"version": 2})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"version": 1, "parts": 0})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"version": 1, "methods": ["gan"]})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"version": 1, "mice": {"forest": {"trees": 3}}})"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"version": 1, "methods": [{"name": "x", "paths": []}]})"),
                  ConfigError);
}

TEST_CASE("seed schedule") {
  const SeedSchedule a{1}, b{2};
  CHECK(a.simulate() != a.split());
  CHECK(a.simulate() != b.simulate());
  CHECK(a.replicate("mice", 1) != a.replicate("mice", 2));
  CHECK(a.replicate("mice", 1) != a.replicate("mice_all_syn", 1));
  CHECK(a.replicate("mice", 1) == SeedSchedule{1}.replicate("mice", 1));
}

TEST_CASE("competition ranks") {
  CHECK(competition_ranks({0.1, 0.1, 0.3}) == std::vector<std::size_t>{1, 1, 3});
  CHECK(competition_ranks({3, 1, 2}) == std::vector<std::size_t>{3, 1, 2});
  CHECK(competition_ranks({3, 1, 3}, true) == std::vector<std::size_t>{1, 3, 1});
}

TEST_CASE("tiny experiment: identities, determinism and persisted files") {
  const auto cfg = ExperimentConfig::from_json_text(kTiny);
  const auto store = run_experiment(cfg);
  CHECK(exit_code(store) == 0);
  CHECK(store.failures.empty());
  CHECK(store.n_train + store.n_test == 3000);

  const auto train = store.summary("training");
  CHECK(train.dataset.categorical_mae == 0.0);
  CHECK(train.dataset.numeric_mae == 0.0);
  CHECK(train.dataset.pairwise_mae == 0.0);
  CHECK(train.dataset.correlation_mae == 0.0);
  REQUIRE(train.m2.has_value());
  CHECK(*train.m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*train.m1 == doctest::Approx(14.0 / 13.0).epsilon(1e-12));

  const auto* ref = store.model_metric("mice", {1, 0});
  REQUIRE(ref != nullptr);
  CHECK(ref->m1 == doctest::Approx(14.0 / 13.0).epsilon(1e-12));
  CHECK(ref->runs == 2);
  for (std::size_t L = 1; L <= 3; ++L) CHECK(store.model_metric("mice", {1, L}) != nullptr);
  CHECK(store.model_metric("mice", {0, 3}) != nullptr);

  const auto curve = augmentation_curve(store, "mice");
  CHECK(curve.points.size() == 4);
  CHECK(curve.missing.empty());
  CHECK(curve.all_synthetic.has_value());
  CHECK(curve.points[0].value == doctest::Approx(14.0 / 13.0));

  const auto table = rank_methods(store, {"m1", "categorical_mae"});
  REQUIRE(table.methods.size() == 2);
  CHECK(table.ranks[1][0] == 1u);  // training has zero categorical error

  const auto d1 = scratch("a"), d2 = scratch("b");
  persist_results(store, cfg, d1.string());
  persist_results(run_experiment(cfg), cfg, d2.string());
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(d1)) {
    ++files;
    CHECK(slurp(entry.path()) == slurp(d2 / entry.path().filename()));
  }
  CHECK(files >= 10);
  CHECK(fs::exists(d1 / "manifest.json"));
  CHECK(fs::exists(d1 / "summary.csv"));
}

TEST_CASE("external synthetic data without a response") {
  const auto dir = scratch("ext");
  const Schema full = fremtpl2_schema();
  std::vector<ColumnSpec> cols(full.columns().begin() + 1, full.columns().end());
  const auto src = surrogate_portfolio(2700, 5);
  std::vector<std::vector<double>> data(src.columns().begin() + 1, src.columns().end());
  write_csv(Dataset(Schema(cols), data), (dir / "syn.csv").string());

  const auto ingested = ingest_synthetic((dir / "syn.csv").string(), full);
  CHECK_FALSE(ingested.has_response);
  CHECK(ingested.data.n_rows() == 2700);

  auto cfg = ExperimentConfig::from_json_text(kTiny);
  cfg.n_experiments = 1;
  MethodSpec ext;
  ext.name = "external";
  ext.source = MethodSpec::Source::external;
  ext.paths = {(dir / "syn.csv").string()};
  cfg.methods = {cfg.methods[0], ext};
  const auto store = run_experiment(cfg);
  REQUIRE(store.failures.size() == 1);
  CHECK(store.failures[0].reason == "missing_response");
  CHECK(exit_code(store) == 3);
  bool has_metrics = false;
  for (const auto& r : store.dataset_metrics) has_metrics |= r.method == "external";
  CHECK(has_metrics);
  const auto curve = augmentation_curve(store, "external");
  CHECK_FALSE(curve.missing.empty());
  CHECK_FALSE(curve.increasing_trend);
}

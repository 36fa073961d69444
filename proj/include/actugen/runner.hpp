#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "actugen/augment.hpp"
#include "actugen/claims_sim.hpp"
#include "actugen/glm.hpp"
#include "actugen/metrics.hpp"
#include "actugen/mice.hpp"
#include "actugen/tabular.hpp"

namespace actugen {

inline constexpr int kConfigVersion = 1;
inline constexpr std::string_view kTrainingMethod = "training";

// One entry of the method roster: the training reference, an internal
// generator, or external synthetic CSVs (one path per replicate).
struct MethodSpec {
  std::string name;
  enum class Source { training, generator, external } source = Source::generator;
  GeneratorKind generator = GeneratorKind::mice_method;
  std::vector<std::string> paths;
};

struct MetricOptions {
  MseConvention mse = MseConvention::squared_error;
  std::size_t n_bins = 10;
  bool mape_keep_zero = false;  // headline MAPE keeps r_hat = 0 terms
};

struct ExperimentConfig {
  std::string data;  // CSV path; empty means the built-in surrogate portfolio
  std::size_t surrogate_rows = 678013;
  char delimiter = ',';
  Schema schema;
  ScenarioKind scenario = ScenarioKind::linear;
  ScenarioReading reading;
  std::size_t n_experiments = 5;
  std::vector<MethodSpec> methods;
  std::size_t parts = 5;
  MetricOptions metrics;
  MiceParams mice;
  bool tabulator_disjoint = true;
  double train_fraction = 0.9;
  std::size_t subsample_rows = 0;  // 0 keeps every row
  std::uint64_t seed = 1;
  std::string output;
  bool stepwise = true;
  bool persist_synthetic = false;

  ExperimentConfig();

  // Unknown keys and a missing or different "version" are ConfigErrors.
  static ExperimentConfig from_json_text(std::string_view text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_json_text() const;
  void validate() const;
};

// Seeds of every stage, derived from the master seed.
struct SeedSchedule {
  std::uint64_t master = 0;
  std::uint64_t surrogate() const;
  std::uint64_t subsample() const;
  std::uint64_t simulate() const;
  std::uint64_t split() const;
  std::uint64_t replicate(std::string_view method, std::size_t k) const;
  static std::uint64_t partition(std::uint64_t replicate_seed);
};

// Loaded (or surrogate) portfolio with unit exposure, optional subsample and
// simulated response, split into training and test sets.
struct PreparedData {
  std::string source;  // data path or "surrogate"
  std::size_t source_rows = 0;
  double mean_frequency = 0.0;
  Dataset full;
  TrainTestSplit split;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// External synthetic CSV under the configured schema. A missing response or
// exposure column is allowed; exposure is then 1 and has_response is false.
struct IngestedSynthetic {
  Dataset data;
  bool has_response = true;
};
IngestedSynthetic ingest_synthetic(const std::string& path, const Schema& schema, char delimiter = ',');

struct FitRecord {
  std::string method;
  std::size_t replicate = 0;  // 1-based; 0 for the training reference
  StructureParam s;
  std::size_t n_rows = 0;
  FittedGLM fit;
};

struct DatasetMetricRecord {
  std::string method;
  std::size_t replicate = 0;
  DatasetMetrics metrics;
};

struct SelectionRecord {
  std::string method;
  std::size_t replicate = 0;
  std::vector<std::string> selected;
  SelectionScores scores;
  double test_deviance = 0.0;       // stepwise model, mean per test row
  double test_rmse = 0.0;
};

struct TestRecord {
  std::string method;
  std::size_t replicate = 0;
  double mean_deviance = 0.0;  // true-structure model, mean per test row
  double rmse = 0.0;
};

struct ModelMetricRecord {
  std::string method;
  StructureParam s;
  std::size_t runs = 0;
  double m1 = 0.0;
  double m2 = 0.0;
};

struct FailureRecord {
  std::string method;
  std::size_t replicate = 0;
  std::string stage;
  std::string reason;  // missing_response, data_error, model_error, not_converged, config_error
  std::string message;
};

// Averages over replicates (M1/M2 at the all-synthetic structure).
struct MethodSummary {
  std::string method;
  std::size_t replicates = 0;
  DatasetMetrics dataset;
  std::optional<double> m1, m2;
  std::optional<double> correct, incorrect, missing_main_effects;
  std::optional<double> test_deviance, test_rmse;              // stepwise model
  std::optional<double> true_test_deviance, true_test_rmse;    // true-structure model
};

struct ResultsStore {
  std::string data_source;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double mean_frequency = 0.0;
  std::size_t parts = 5;
  std::vector<std::string> term_names;
  Eigen::VectorXd beta_star;
  Eigen::VectorXd beta_hat_ref;
  Eigen::VectorXd mse_ref;
  std::vector<std::string> truth_units;

  std::vector<std::string> methods;
  std::vector<DatasetMetricRecord> dataset_metrics;
  std::vector<FitRecord> fits;
  std::vector<ModelMetricRecord> model_metrics;
  std::vector<SelectionRecord> selections;
  std::vector<TestRecord> tests;
  std::vector<FailureRecord> failures;

  const ModelMetricRecord* model_metric(std::string_view method, StructureParam s) const;
  MethodSummary summary(std::string_view method) const;
};

ResultsStore run_experiment(const ExperimentConfig& cfg);

// Standard competition ranks: ties share the best available rank (1, 1, 3).
std::vector<std::size_t> competition_ranks(const std::vector<double>& values, bool higher_is_better = false);

struct RankingTable {
  std::vector<std::string> metrics;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> values;               // [metric][method], NaN when absent
  std::vector<std::vector<std::optional<std::size_t>>> ranks;
};

// Metric names: categorical_mae, categorical_mape, numeric_mae, numeric_mape,
// pairwise_mae, pairwise_mape, correlation_mae, correlation_mape, m1, m2,
// correct, incorrect, test_deviance, test_rmse. Only "correct" ranks the
// largest value first. Empty list = all.
RankingTable rank_methods(const ResultsStore& store, std::vector<std::string> metrics = {});
std::optional<double> summary_metric(const MethodSummary& summary, std::string_view metric);

struct CurvePoint {
  std::size_t L = 0;
  double proportion = 0.0;
  std::optional<double> value;
};

struct AugmentationCurve {
  std::string method;
  std::string metric;  // m1 or m2
  std::vector<CurvePoint> points;  // L = 0..m with t = 1
  std::optional<double> all_synthetic;
  std::vector<std::string> missing;  // structure labels without a value
  std::size_t inversions = 0;        // decreases from L = 1 to L = m
  bool increasing_trend = false;     // at most one inversion and more than one point
  bool asymptote_above = false;      // all-synthetic value exceeds every (1, L) value
};

AugmentationCurve augmentation_curve(const ResultsStore& store, std::string_view method, std::string_view metric = "m1");

// Writes the result tables and manifest.json into `dir` (created if needed).
void persist_results(const ResultsStore& store, const ExperimentConfig& cfg, const std::string& dir);

// 0 success, 3 when some (method, replicate) cells failed.
int exit_code(const ResultsStore& store);

}  // namespace actugen

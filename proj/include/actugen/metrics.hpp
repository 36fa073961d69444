#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "actugen/glm.hpp"
#include "actugen/tabular.hpp"

namespace actugen {

// Share of rows in each feature (level or bin) of each variable, and in each
// feature pair of each variable pair.
struct FeatureRatios {
  std::size_t n_rows = 0;
  std::vector<std::vector<double>> single;               // [variable][feature]
  std::vector<std::vector<std::vector<double>>> joint;   // [a][b - a - 1][k * n_b + u], a < b

  static FeatureRatios compute(const Dataset& ds, const BinMap& bins);
  std::span<const double> pair(std::size_t a, std::size_t b) const;  // a < b
};

// Training and synthetic ratios over the same binning, plus Pearson
// correlations of the numeric variables.
struct RatioTable {
  BinMap bins;
  FeatureRatios train;
  FeatureRatios synthetic;
  std::vector<std::string> numeric;          // names, in bin-map order
  Eigen::MatrixXd rho;                       // training, NaN for zero variance
  Eigen::MatrixXd rho_hat;                   // synthetic

  // Bins come from `train`. Columns default to the covariates.
  static RatioTable build(const Dataset& train, const Dataset& synthetic, std::size_t n_bins = 10,
                          std::vector<std::string> columns = {});
  static RatioTable build(const Dataset& train, const Dataset& synthetic, BinMap bins);

  std::size_t n_variables() const { return bins.variables.size(); }
};

// Mean absolute and mean relative error of r against r_hat. Relative terms
// divide by |r_hat|. Terms with r_hat = 0 are left out of `mape` and counted
// in `zero_denominators`; `mape_keep` keeps them (infinite unless r = 0 too,
// which contributes 0).
struct ErrorSummary {
  double mae = 0.0;
  double mape = 0.0;
  double mape_keep = 0.0;
  std::size_t terms = 0;
  std::size_t zero_denominators = 0;
};

ErrorSummary compare_values(std::span<const double> r, std::span<const double> r_hat);

// Features empty in both tables are not part of the variable.
ErrorSummary marginal_mae_mape(const RatioTable& ratios, std::size_t variable);
ErrorSummary pairwise_mae_mape(const RatioTable& ratios, std::size_t a, std::size_t b);

struct CorrelationSummary {
  ErrorSummary error;
  std::vector<std::pair<std::string, std::string>> excluded;  // zero-variance pairs
};

// Over unordered pairs of numeric variables.
CorrelationSummary correlation_mae_mape(const RatioTable& ratios);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
Eigen::MatrixXd correlation_matrix(const Dataset& ds, const std::vector<std::size_t>& columns);

// Unweighted means over variables (or variable pairs).
struct DatasetMetrics {
  double categorical_mae = 0.0;
  double categorical_mape = 0.0;
  double numeric_mae = 0.0;
  double numeric_mape = 0.0;
  double pairwise_mae = 0.0;
  double pairwise_mape = 0.0;
  double correlation_mae = 0.0;
  double correlation_mape = 0.0;
  // Same means with zero-denominator terms kept.
  double categorical_mape_keep = 0.0;
  double numeric_mape_keep = 0.0;
  double pairwise_mape_keep = 0.0;
  double correlation_mape_keep = 0.0;
  std::size_t zero_denominators = 0;
  std::size_t excluded_correlation_pairs = 0;
  std::vector<std::pair<std::string, ErrorSummary>> per_variable;
};

DatasetMetrics dataset_metrics(const RatioTable& ratios);
DatasetMetrics dataset_metrics(const Dataset& train, const Dataset& synthetic, std::size_t n_bins = 10);

enum class MseConvention { squared_error, squared_se };
MseConvention parse_mse_convention(std::string_view name);  // throws ConfigError
std::string_view to_string(MseConvention convention);

// Reference MSE of each training coefficient: (beta* - beta_hat)^2, or the
// squared standard error from the fit covariance.
Eigen::VectorXd mse_ref(MseConvention convention, const Eigen::VectorXd& beta_star, const FittedGLM& fit);

struct ModelMetricInputs {
  Eigen::VectorXd beta_star;
  Eigen::VectorXd beta_hat_ref;
  Eigen::VectorXd mse_ref;
  std::vector<Eigen::VectorXd> beta_runs;

  std::size_t d() const { return static_cast<std::size_t>(beta_star.size()) - 1; }
  void validate() const;  // throws ModelError
};

// (1/d)(1/n_E) sum_k sum_{j=0..d} (beta*_j - beta_run_kj)^2 / mse_j
double m1(const ModelMetricInputs& in);

// (1/d) sum_{j=1..d} [mse_j + (1/n_E) sum_k (beta_hat_j - beta_run_kj)^2] / mse_j
double m2(const ModelMetricInputs& in);

}  // namespace actugen

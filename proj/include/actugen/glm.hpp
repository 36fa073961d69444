#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "actugen/claims_sim.hpp"
#include "actugen/tabular.hpp"
#include "actugen/terms.hpp"

namespace actugen {

// Ordered GLM terms, intercept first. Term::unit groups terms into the
// variables stepwise selection adds and drops as a whole.
struct DesignSpec {
  std::vector<Term> terms;

  std::vector<std::string> names() const;
  std::vector<std::string> units() const;  // first-appearance order, intercept excluded
  void validate() const;                   // throws ConfigError

  static DesignSpec from_scenario(const Scenario& scenario);
};

struct Design {
  Eigen::MatrixXd x;       // n x k, column j = term j evaluated rowwise
  Eigen::VectorXd offset;  // ln(exposure); zero without an exposure column
  std::vector<std::string> names;
};

Design build_design(const Dataset& ds, const DesignSpec& spec);
Eigen::VectorXd response_vector(const Dataset& ds);  // throws DataError without a response column

struct FitOptions {
  double tolerance = 1e-10;  // on |dev - dev_prev| / (|dev| + 0.1)
  std::size_t max_iterations = 50;
  std::size_t max_halvings = 10;
  std::optional<Eigen::VectorXd> start;  // overrides the default warm start
};

struct FittedGLM {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // (X'WX)^-1 at the optimum
  double deviance = 0.0;
  double log_likelihood = 0.0;  // full Poisson log-likelihood incl. -ln(y!)
  double aic = 0.0;
  std::size_t n_obs = 0;
  std::size_t iterations = 0;
  bool converged = false;

  Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
  std::size_t n_params() const { return static_cast<std::size_t>(beta.size()); }
};

// Poisson log-link GLM by iteratively reweighted least squares with step
// halving. `columns` restricts the fit to a subset of x's columns (all when
// empty). Rank deficiency throws ModelError naming the collinear columns;
// running out of iterations returns converged = false.
FittedGLM fit_poisson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& offset,
                      const FitOptions& options = {}, std::span<const Eigen::Index> columns = {},
                      std::vector<std::string> names = {});

FittedGLM fit_design(const Dataset& ds, const DesignSpec& spec, const FitOptions& options = {});

// Fitted means exp(x beta + offset).
Eigen::VectorXd predict(const FittedGLM& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& offset);
Eigen::VectorXd predict(const FittedGLM& fit, const Dataset& ds, const DesignSpec& spec);

// 2 sum [y ln(y / yhat) - (y - yhat)], the y = 0 term read as 2 yhat.
double poisson_deviance(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
double poisson_log_likelihood(std::span<const double> y, std::span<const double> mu);
double aic(const FittedGLM& fit);

struct StepwiseResult {
  std::vector<std::string> selected;  // units, in scope order
  DesignSpec spec;
  FittedGLM fit;
  std::size_t moves = 0;
};

struct StepwiseOptions {
  FitOptions fit;
  // Run the bidirectional search from the empty and from the full model and
  // keep the better end point. When false only the empty start is used.
  bool both_starts = true;
};

// Bidirectional greedy AIC search over the units of `scope`. Each step takes
// the single add or drop with the lowest AIC and stops when no move lowers
// it. Ties go to fewer parameters, then the lexicographically smaller unit.
StepwiseResult stepwise_aic(const Dataset& ds, const DesignSpec& scope, const StepwiseOptions& options = {});

// Scope over whole variables: a categorical column enters as its dummy block
// (reference = most frequent level; levels absent from ds are left out), a
// numeric column as itself. `extra_units` (e.g. interaction terms) are
// appended as units of their own.
DesignSpec variable_scope(const Dataset& ds, const std::vector<std::string>& variables,
                          const std::vector<Term>& extra_units = {});

// Scope for a scenario: every covariate of ds, plus the scenario's
// interaction terms.
DesignSpec selection_scope(const Dataset& ds, const Scenario& scenario);

struct SelectionScores {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t missing_main_effects = 0;
};

// `parents` maps an interaction unit to the main-effect variables it
// involves; each selected interaction counts one missing main effect per
// parent that is not itself selected.
SelectionScores selection_scores(const std::vector<std::string>& selected, const std::vector<std::string>& truth,
                                 const std::map<std::string, std::vector<std::string>>& parents);

// Interaction units of a scenario mapped to the columns they involve.
std::map<std::string, std::vector<std::string>> interaction_parents(const Scenario& scenario);

}  // namespace actugen

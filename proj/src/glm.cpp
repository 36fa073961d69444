#include "actugen/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "actugen/error.hpp"

namespace actugen {

std::vector<std::string> DesignSpec::names() const {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.name);
  return out;
}

std::vector<std::string> DesignSpec::units() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (t.is_intercept()) continue;
    if (std::find(out.begin(), out.end(), t.unit) == out.end()) out.push_back(t.unit);
  }
  return out;
}

void DesignSpec::validate() const {
  if (terms.empty() || !terms.front().is_intercept()) throw ConfigError("design: intercept must come first");
  std::set<std::string> seen;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (j > 0 && terms[j].is_intercept()) throw ConfigError("design: more than one intercept");
    if (!seen.insert(terms[j].name).second) throw ConfigError("design: duplicate term '" + terms[j].name + "'");
  }
}

DesignSpec DesignSpec::from_scenario(const Scenario& scenario) {
  scenario.validate();
  DesignSpec spec{scenario.terms};
  spec.validate();
  return spec;
}

Design build_design(const Dataset& ds, const DesignSpec& spec) {
  spec.validate();
  BoundTerms bound(spec.terms, ds.schema());
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  Design d;
  d.x.resize(n, static_cast<Eigen::Index>(spec.terms.size()));
  for (std::size_t j = 0; j < spec.terms.size(); ++j) bound.fill(ds, j, d.x.col(static_cast<Eigen::Index>(j)).data());
  d.offset = Eigen::VectorXd::Zero(n);
  if (auto e = ds.schema().exposure()) {
    auto v = ds.column(*e);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ex = v[static_cast<std::size_t>(i)];
      if (!(ex > 0.0)) throw DataError("row " + std::to_string(i + 1) + ": exposure must be positive");
      d.offset[i] = std::log(ex);
    }
  }
  d.names = spec.names();
  return d;
}

Eigen::VectorXd response_vector(const Dataset& ds) {
  auto r = ds.schema().response();
  if (!r) throw DataError("dataset has no response column");
  auto col = ds.column(*r);
  return Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
}

// ---------------------------------------------------------------------------

double poisson_deviance(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw ConfigError("poisson_deviance: length mismatch");
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(yhat[i] > 0.0)) throw ModelError("poisson_deviance: fitted mean must be positive");
    if (y[i] < 0.0) throw ModelError("poisson_deviance: negative response");
    dev += y[i] > 0.0 ? y[i] * std::log(y[i] / yhat[i]) - (y[i] - yhat[i]) : yhat[i];
  }
  return 2.0 * dev;
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw ConfigError("rmse: length mismatch");
  if (y.empty()) throw ConfigError("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double poisson_log_likelihood(std::span<const double> y, std::span<const double> mu) {
  double ll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ll += -mu[i] - std::lgamma(y[i] + 1.0);
    if (y[i] > 0.0) ll += y[i] * std::log(mu[i]);
  }
  return ll;
}

double aic(const FittedGLM& fit) { return 2.0 * static_cast<double>(fit.n_params()) - 2.0 * fit.log_likelihood; }

namespace {

constexpr Eigen::Index kBlockRows = 4096;

// Column subset of a design matrix, read in row blocks.
struct DesignView {
  const Eigen::MatrixXd& x;
  std::vector<Eigen::Index> cols;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index k() const { return static_cast<Eigen::Index>(cols.size()); }
  Eigen::MatrixXd rows(Eigen::Index r0, Eigen::Index nb) const { return x(Eigen::seqN(r0, nb), cols); }
};

Eigen::VectorXd linear_part(const DesignView& v, const Eigen::VectorXd& beta, const Eigen::VectorXd& offset) {
  Eigen::VectorXd eta(v.n());
  for (Eigen::Index r0 = 0; r0 < v.n(); r0 += kBlockRows) {
    const Eigen::Index nb = std::min(kBlockRows, v.n() - r0);
    eta.segment(r0, nb) = v.rows(r0, nb) * beta + offset.segment(r0, nb);
  }
  return eta;
}

// X'WX (full symmetric) and X'Wz.
void weighted_normal_equations(const DesignView& v, const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                               Eigen::MatrixXd& xtwx, Eigen::VectorXd& xtwz) {
  const Eigen::Index k = v.k();
  xtwx.setZero(k, k);
  xtwz.setZero(k);
  Eigen::MatrixXd weighted;
  for (Eigen::Index r0 = 0; r0 < v.n(); r0 += kBlockRows) {
    const Eigen::Index nb = std::min(kBlockRows, v.n() - r0);
    const Eigen::MatrixXd block = v.rows(r0, nb);
    weighted = block.array().colwise() * w.segment(r0, nb).array().sqrt();
    xtwx.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    xtwz.noalias() += block.transpose() * w.segment(r0, nb).cwiseProduct(z.segment(r0, nb));
  }
  xtwx = xtwx.selfadjointView<Eigen::Lower>();
}

double deviance_of(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) return std::numeric_limits<double>::infinity();
  return poisson_deviance(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                          std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())));
}

void check_rank(const Eigen::MatrixXd& xtwx, const std::vector<std::string>& names) {
  const Eigen::Index k = xtwx.rows();
  std::vector<std::string> bad;
  Eigen::VectorXd scale(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(xtwx(j, j) > 0.0)) bad.push_back(names[static_cast<std::size_t>(j)]);
    scale[j] = xtwx(j, j) > 0.0 ? 1.0 / std::sqrt(xtwx(j, j)) : 0.0;
  }
  if (bad.empty()) {
    const Eigen::MatrixXd scaled = scale.asDiagonal() * xtwx * scale.asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    qr.setThreshold(1e-11);
    if (qr.rank() < k) {
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index j = qr.rank(); j < k; ++j) bad.push_back(names[static_cast<std::size_t>(perm[j])]);
    }
  }
  if (!bad.empty()) {
    std::string msg = "rank-deficient design; collinear or empty terms:";
    for (const auto& b : bad) msg += " " + b;
    throw ModelError(msg);
  }
}

}  // namespace

FittedGLM fit_poisson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& offset,
                      const FitOptions& options, std::span<const Eigen::Index> columns,
                      std::vector<std::string> names) {
  const Eigen::Index n = x.rows();
  if (y.size() != n || offset.size() != n) throw ConfigError("fit_poisson: dimension mismatch");
  if (n == 0) throw ModelError("fit_poisson: no observations");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(y[i] >= 0.0) || !std::isfinite(y[i])) throw ModelError("fit_poisson: response must be non-negative");

  DesignView view{x, {}};
  if (columns.empty()) {
    view.cols.resize(static_cast<std::size_t>(x.cols()));
    std::iota(view.cols.begin(), view.cols.end(), Eigen::Index{0});
  } else {
    view.cols.assign(columns.begin(), columns.end());
  }
  const Eigen::Index k = view.k();
  if (k == 0) throw ConfigError("fit_poisson: no columns");
  if (names.empty())
    for (Eigen::Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(view.cols[static_cast<std::size_t>(j)]));
  if (static_cast<Eigen::Index>(names.size()) != k) throw ConfigError("fit_poisson: names do not match columns");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  if (options.start) {
    if (options.start->size() != k) throw ConfigError("fit_poisson: start vector has wrong length");
    beta = *options.start;
  } else if ((x.col(view.cols[0]).array() == 1.0).all()) {
    beta[0] = std::log((y.sum() + 0.5) / static_cast<double>(n)) - offset.mean();
  }

  FittedGLM fit;
  fit.names = std::move(names);
  fit.n_obs = static_cast<std::size_t>(n);

  Eigen::VectorXd eta = linear_part(view, beta, offset);
  Eigen::VectorXd mu = eta.array().exp();
  double dev = deviance_of(y, mu);
  Eigen::MatrixXd xtwx;
  Eigen::VectorXd xtwz;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd z = (eta - offset).array() + (y - mu).array() / mu.array();
    weighted_normal_equations(view, mu, z, xtwx, xtwz);
    if (it == 1) check_rank(xtwx, fit.names);
    Eigen::LLT<Eigen::MatrixXd> llt(xtwx);
    if (llt.info() != Eigen::Success) throw ModelError("fit_poisson: weighted normal equations not positive definite");
    Eigen::VectorXd next = llt.solve(xtwz);

    Eigen::VectorXd next_eta = linear_part(view, next, offset);
    Eigen::VectorXd next_mu = next_eta.array().exp();
    double next_dev = deviance_of(y, next_mu);
    for (std::size_t h = 0; h < options.max_halvings && !(next_dev <= dev * (1.0 + 1e-12)); ++h) {
      next = (beta + next) / 2.0;
      next_eta = linear_part(view, next, offset);
      next_mu = next_eta.array().exp();
      next_dev = deviance_of(y, next_mu);
    }
    if (!std::isfinite(next_dev)) throw ModelError("fit_poisson: deviance diverged");
    const double change = std::fabs(next_dev - dev) / (std::fabs(next_dev) + 0.1);
    beta = std::move(next);
    eta = std::move(next_eta);
    mu = std::move(next_mu);
    dev = next_dev;
    fit.iterations = it;
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }

  weighted_normal_equations(view, mu, Eigen::VectorXd::Zero(n), xtwx, xtwz);
  Eigen::LLT<Eigen::MatrixXd> llt(xtwx);
  if (llt.info() != Eigen::Success) throw ModelError("fit_poisson: information matrix not positive definite");
  fit.covariance = llt.solve(Eigen::MatrixXd::Identity(k, k));
  fit.covariance = (fit.covariance + fit.covariance.transpose()) / 2.0;
  fit.beta = std::move(beta);
  const std::span<const double> ys(y.data(), static_cast<std::size_t>(n));
  const std::span<const double> mus(mu.data(), static_cast<std::size_t>(n));
  fit.deviance = poisson_deviance(ys, mus);
  fit.log_likelihood = poisson_log_likelihood(ys, mus);
  fit.aic = aic(fit);
  return fit;
}

FittedGLM fit_design(const Dataset& ds, const DesignSpec& spec, const FitOptions& options) {
  const Design d = build_design(ds, spec);
  return fit_poisson(d.x, response_vector(ds), d.offset, options, {}, d.names);
}

Eigen::VectorXd predict(const FittedGLM& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& offset) {
  if (x.cols() != fit.beta.size()) throw ConfigError("predict: design has wrong number of columns");
  return ((x * fit.beta) + offset).array().exp();
}

Eigen::VectorXd predict(const FittedGLM& fit, const Dataset& ds, const DesignSpec& spec) {
  const Design d = build_design(ds, spec);
  return predict(fit, d.x, d.offset);
}

// ---------------------------------------------------------------------------
// Stepwise selection

namespace {

struct Candidate {
  std::vector<bool> in;  // per unit
  FittedGLM fit;
};

class StepwiseSearch {
 public:
  StepwiseSearch(const Dataset& ds, const DesignSpec& scope, const FitOptions& fit_options)
      : design_(build_design(ds, scope)), y_(response_vector(ds)), scope_(scope), options_(fit_options) {
    units_ = scope.units();
    unit_cols_.resize(units_.size());
    for (std::size_t j = 1; j < scope.terms.size(); ++j) {
      auto u = std::find(units_.begin(), units_.end(), scope.terms[j].unit) - units_.begin();
      unit_cols_[static_cast<std::size_t>(u)].push_back(static_cast<Eigen::Index>(j));
    }
  }

  std::size_t n_units() const { return units_.size(); }
  const std::vector<std::string>& units() const { return units_; }

  // Greedy bidirectional search from `start`; `moves` counts applied moves.
  Candidate run(std::vector<bool> start, std::size_t& moves) {
    Candidate current = evaluate(start, nullptr);
    for (;;) {
      std::optional<Candidate> best;
      std::string best_unit;
      for (std::size_t u = 0; u < units_.size(); ++u) {
        auto next = current.in;
        next[u] = !next[u];
        Candidate c = evaluate(next, &current);
        if (!best || better(c, units_[u], *best, best_unit)) {
          best = std::move(c);
          best_unit = units_[u];
        }
      }
      const double margin = 1e-9 * (1.0 + std::fabs(current.fit.aic));
      if (!best || !(best->fit.aic < current.fit.aic - margin)) break;
      current = std::move(*best);
      ++moves;
    }
    return current;
  }

  std::vector<Eigen::Index> columns_of(const std::vector<bool>& in) const {
    std::vector<Eigen::Index> cols{0};
    for (std::size_t u = 0; u < units_.size(); ++u)
      if (in[u]) cols.insert(cols.end(), unit_cols_[u].begin(), unit_cols_[u].end());
    std::sort(cols.begin(), cols.end());
    return cols;
  }

 private:
  Design design_;
  Eigen::VectorXd y_;
  const DesignSpec& scope_;
  FitOptions options_;
  std::vector<std::string> units_;
  std::vector<std::vector<Eigen::Index>> unit_cols_;

  static bool better(const Candidate& a, const std::string& a_unit, const Candidate& b, const std::string& b_unit) {
    const double tol = 1e-9 * (1.0 + std::fabs(b.fit.aic));
    if (a.fit.aic < b.fit.aic - tol) return true;
    if (a.fit.aic > b.fit.aic + tol) return false;
    if (a.fit.n_params() != b.fit.n_params()) return a.fit.n_params() < b.fit.n_params();
    return a_unit < b_unit;
  }

  Candidate evaluate(const std::vector<bool>& in, const Candidate* warm) {
    const auto cols = columns_of(in);
    std::vector<std::string> names;
    for (auto c : cols) names.push_back(design_.names[static_cast<std::size_t>(c)]);
    FitOptions opts = options_;
    if (warm) {
      // Reuse coefficients of columns shared with the current model.
      const auto prev = columns_of(warm->in);
      Eigen::VectorXd start = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t i = 0; i < cols.size(); ++i) {
        auto it = std::lower_bound(prev.begin(), prev.end(), cols[i]);
        if (it != prev.end() && *it == cols[i]) start[static_cast<Eigen::Index>(i)] = warm->fit.beta[it - prev.begin()];
      }
      opts.start = std::move(start);
    }
    Candidate c{in, fit_poisson(design_.x, y_, design_.offset, opts, cols, std::move(names))};
    if (!c.fit.converged && warm) {
      // A poor warm start can stall; retry from the default start.
      opts.start.reset();
      c.fit = fit_poisson(design_.x, y_, design_.offset, opts, cols, c.fit.names);
    }
    return c;
  }
};

}  // namespace

StepwiseResult stepwise_aic(const Dataset& ds, const DesignSpec& scope, const StepwiseOptions& options) {
  scope.validate();
  StepwiseSearch search(ds, scope, options.fit);
  const std::size_t u = search.n_units();

  std::size_t moves_empty = 0, moves_full = 0;
  Candidate best = search.run(std::vector<bool>(u, false), moves_empty);
  std::size_t moves = moves_empty;
  if (options.both_starts && u > 0) {
    Candidate from_full = search.run(std::vector<bool>(u, true), moves_full);
    const double tol = 1e-9 * (1.0 + std::fabs(best.fit.aic));
    bool take = from_full.fit.aic < best.fit.aic - tol;
    if (!take && std::fabs(from_full.fit.aic - best.fit.aic) <= tol) {
      if (from_full.fit.n_params() != best.fit.n_params())
        take = from_full.fit.n_params() < best.fit.n_params();
      else
        take = from_full.fit.names < best.fit.names;
    }
    if (take) {
      best = std::move(from_full);
      moves = moves_full;
    }
  }

  StepwiseResult out;
  out.spec.terms.push_back(scope.terms.front());
  for (std::size_t i = 0; i < u; ++i)
    if (best.in[i]) out.selected.push_back(search.units()[i]);
  for (std::size_t j = 1; j < scope.terms.size(); ++j)
    if (std::find(out.selected.begin(), out.selected.end(), scope.terms[j].unit) != out.selected.end())
      out.spec.terms.push_back(scope.terms[j]);
  out.fit = std::move(best.fit);
  out.moves = moves;
  return out;
}

DesignSpec variable_scope(const Dataset& ds, const std::vector<std::string>& variables,
                          const std::vector<Term>& extra_units) {
  DesignSpec spec;
  spec.terms.push_back(Term::intercept());
  for (const auto& name : variables) {
    const auto j = ds.schema().index_of(name);
    const auto& col = ds.schema()[j];
    if (!col.is_categorical()) {
      spec.terms.push_back(Term::numeric(name));
      continue;
    }
    std::vector<std::size_t> counts(col.levels.size(), 0);
    for (double v : ds.column(j)) ++counts[static_cast<std::size_t>(v)];
    const std::string reference = default_reference_level(ds, j);
    for (std::size_t k = 0; k < col.levels.size(); ++k) {
      if (counts[k] == 0 || col.levels[k] == reference) continue;
      spec.terms.push_back(Term::level_set(name, {col.levels[k]}));
    }
  }
  for (const auto& t : extra_units) {
    Term copy = t;
    if (copy.factors.size() > 1) copy.unit = copy.name;
    spec.terms.push_back(std::move(copy));
  }
  spec.validate();
  return spec;
}

DesignSpec selection_scope(const Dataset& ds, const Scenario& scenario) {
  std::vector<Term> interactions;
  for (const auto& t : scenario.terms)
    if (t.factors.size() > 1) interactions.push_back(t);
  return variable_scope(ds, covariate_names(ds.schema()), interactions);
}

SelectionScores selection_scores(const std::vector<std::string>& selected, const std::vector<std::string>& truth,
                                 const std::map<std::string, std::vector<std::string>>& parents) {
  SelectionScores s;
  const std::set<std::string> sel(selected.begin(), selected.end());
  const std::set<std::string> tru(truth.begin(), truth.end());
  for (const auto& u : sel) {
    if (tru.count(u))
      ++s.correct;
    else
      ++s.incorrect;
    auto it = parents.find(u);
    if (it == parents.end()) continue;
    for (const auto& p : it->second)
      if (!sel.count(p)) ++s.missing_main_effects;
  }
  return s;
}

std::map<std::string, std::vector<std::string>> interaction_parents(const Scenario& scenario) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& t : scenario.terms)
    if (t.factors.size() > 1) out[t.unit] = t.columns();
  return out;
}

}  // namespace actugen

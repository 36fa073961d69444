#include "actugen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "actugen/error.hpp"

namespace actugen {

namespace {

std::vector<std::vector<std::size_t>> feature_codes(const Dataset& ds, const BinMap& bins) {
  std::vector<std::vector<std::size_t>> codes(bins.variables.size());
  for (std::size_t v = 0; v < bins.variables.size(); ++v) {
    const auto& vb = bins.variables[v];
    const auto j = ds.schema().index_of(vb.name);
    if (ds.schema()[j].kind != vb.kind) throw DataError("column '" + vb.name + "' changed kind");
    auto col = ds.column(j);
    codes[v].resize(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) {
      const auto f = vb.feature_of(col[i]);
      if (f >= vb.n_features) throw DataError("column '" + vb.name + "': level outside the binning");
      codes[v][i] = f;
    }
  }
  return codes;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

FeatureRatios FeatureRatios::compute(const Dataset& ds, const BinMap& bins) {
  if (ds.n_rows() == 0) throw DataError("cannot compute ratios of an empty dataset");
  const auto codes = feature_codes(ds, bins);
  const std::size_t nv = bins.variables.size();
  const double inv = 1.0 / static_cast<double>(ds.n_rows());
  FeatureRatios out;
  out.n_rows = ds.n_rows();
  out.single.resize(nv);
  out.joint.resize(nv);
  for (std::size_t a = 0; a < nv; ++a) {
    const std::size_t na = bins.variables[a].n_features;
    std::vector<double> counts(na, 0.0);
    for (auto f : codes[a]) counts[f] += 1.0;
    for (auto& c : counts) c *= inv;
    out.single[a] = std::move(counts);
    for (std::size_t b = a + 1; b < nv; ++b) {
      const std::size_t nb = bins.variables[b].n_features;
      std::vector<double> cells(na * nb, 0.0);
      for (std::size_t i = 0; i < ds.n_rows(); ++i) cells[codes[a][i] * nb + codes[b][i]] += 1.0;
      for (auto& c : cells) c *= inv;
      out.joint[a].push_back(std::move(cells));
    }
  }
  return out;
}

std::span<const double> FeatureRatios::pair(std::size_t a, std::size_t b) const {
  if (a >= b || b >= single.size()) throw ConfigError("pair: need a < b < number of variables");
  return joint[a][b - a - 1];
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Eigen::MatrixXd correlation_matrix(const Dataset& ds, const std::vector<std::size_t>& columns) {
  const auto k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd rho = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = a; b < k; ++b) {
      auto r = pearson(ds.column(columns[static_cast<std::size_t>(a)]), ds.column(columns[static_cast<std::size_t>(b)]));
      if (r) rho(a, b) = rho(b, a) = (a == b ? 1.0 : *r);
    }
  return rho;
}

RatioTable RatioTable::build(const Dataset& train, const Dataset& synthetic, std::size_t n_bins,
                             std::vector<std::string> columns) {
  return build(train, synthetic, BinMap::build(train, std::move(columns), n_bins));
}

RatioTable RatioTable::build(const Dataset& train, const Dataset& synthetic, BinMap bins) {
  RatioTable t;
  t.bins = std::move(bins);
  t.train = FeatureRatios::compute(train, t.bins);
  t.synthetic = FeatureRatios::compute(synthetic, t.bins);
  std::vector<std::size_t> tc, sc;
  for (const auto& vb : t.bins.variables) {
    if (vb.kind != ColumnKind::numeric) continue;
    t.numeric.push_back(vb.name);
    tc.push_back(train.schema().index_of(vb.name));
    sc.push_back(synthetic.schema().index_of(vb.name));
  }
  t.rho = correlation_matrix(train, tc);
  t.rho_hat = correlation_matrix(synthetic, sc);
  return t;
}

ErrorSummary compare_values(std::span<const double> r, std::span<const double> r_hat) {
  if (r.size() != r_hat.size()) throw ConfigError("compare_values: length mismatch");
  ErrorSummary s;
  s.terms = r.size();
  if (r.empty()) return s;
  double abs_sum = 0.0, rel_sum = 0.0, keep_sum = 0.0;
  std::size_t rel_terms = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double diff = std::fabs(r[i] - r_hat[i]);
    abs_sum += diff;
    if (r_hat[i] == 0.0) {
      ++s.zero_denominators;
      keep_sum += diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      continue;
    }
    const double rel = diff / std::fabs(r_hat[i]);
    rel_sum += rel;
    keep_sum += rel;
    ++rel_terms;
  }
  s.mae = abs_sum / static_cast<double>(r.size());
  s.mape = rel_terms ? rel_sum / static_cast<double>(rel_terms) : 0.0;
  s.mape_keep = keep_sum / static_cast<double>(r.size());
  return s;
}

namespace {

ErrorSummary compare_nonempty(std::span<const double> r, std::span<const double> r_hat) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] == 0.0 && r_hat[i] == 0.0) continue;
    a.push_back(r[i]);
    b.push_back(r_hat[i]);
  }
  return compare_values(a, b);
}

}  // namespace

ErrorSummary marginal_mae_mape(const RatioTable& ratios, std::size_t variable) {
  if (variable >= ratios.n_variables()) throw ConfigError("marginal_mae_mape: variable out of range");
  return compare_nonempty(ratios.train.single[variable], ratios.synthetic.single[variable]);
}

ErrorSummary pairwise_mae_mape(const RatioTable& ratios, std::size_t a, std::size_t b) {
  if (a == b) throw ConfigError("pairwise_mae_mape: variables must differ");
  if (a > b) std::swap(a, b);
  return compare_nonempty(ratios.train.pair(a, b), ratios.synthetic.pair(a, b));
}

CorrelationSummary correlation_mae_mape(const RatioTable& ratios) {
  CorrelationSummary out;
  std::vector<double> r, r_hat;
  const auto k = ratios.rho.rows();
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = a + 1; b < k; ++b) {
      if (std::isnan(ratios.rho(a, b)) || std::isnan(ratios.rho_hat(a, b))) {
        out.excluded.emplace_back(ratios.numeric[static_cast<std::size_t>(a)],
                                  ratios.numeric[static_cast<std::size_t>(b)]);
        continue;
      }
      r.push_back(ratios.rho(a, b));
      r_hat.push_back(ratios.rho_hat(a, b));
    }
  out.error = compare_values(r, r_hat);
  return out;
}

DatasetMetrics dataset_metrics(const RatioTable& ratios) {
  DatasetMetrics m;
  std::vector<double> cat_mae, cat_mape, cat_keep, num_mae, num_mape, num_keep;
  for (std::size_t v = 0; v < ratios.n_variables(); ++v) {
    const auto e = marginal_mae_mape(ratios, v);
    m.zero_denominators += e.zero_denominators;
    const bool categorical = ratios.bins.variables[v].kind == ColumnKind::categorical;
    (categorical ? cat_mae : num_mae).push_back(e.mae);
    (categorical ? cat_mape : num_mape).push_back(e.mape);
    (categorical ? cat_keep : num_keep).push_back(e.mape_keep);
    m.per_variable.emplace_back(ratios.bins.variables[v].name, e);
  }
  m.categorical_mae = mean_of(cat_mae);
  m.categorical_mape = mean_of(cat_mape);
  m.categorical_mape_keep = mean_of(cat_keep);
  m.numeric_mae = mean_of(num_mae);
  m.numeric_mape = mean_of(num_mape);
  m.numeric_mape_keep = mean_of(num_keep);

  std::vector<double> pair_mae, pair_mape, pair_keep;
  for (std::size_t a = 0; a < ratios.n_variables(); ++a)
    for (std::size_t b = a + 1; b < ratios.n_variables(); ++b) {
      const auto e = pairwise_mae_mape(ratios, a, b);
      m.zero_denominators += e.zero_denominators;
      pair_mae.push_back(e.mae);
      pair_mape.push_back(e.mape);
      pair_keep.push_back(e.mape_keep);
    }
  m.pairwise_mae = mean_of(pair_mae);
  m.pairwise_mape = mean_of(pair_mape);
  m.pairwise_mape_keep = mean_of(pair_keep);

  const auto c = correlation_mae_mape(ratios);
  m.correlation_mae = c.error.mae;
  m.correlation_mape = c.error.mape;
  m.correlation_mape_keep = c.error.mape_keep;
  m.zero_denominators += c.error.zero_denominators;
  m.excluded_correlation_pairs = c.excluded.size();
  return m;
}

DatasetMetrics dataset_metrics(const Dataset& train, const Dataset& synthetic, std::size_t n_bins) {
  return dataset_metrics(RatioTable::build(train, synthetic, n_bins));
}

MseConvention parse_mse_convention(std::string_view name) {
  if (name == "squared_error") return MseConvention::squared_error;
  if (name == "squared_se") return MseConvention::squared_se;
  throw ConfigError("unknown MSE convention '" + std::string(name) + "' (squared_error | squared_se)");
}

std::string_view to_string(MseConvention convention) {
  return convention == MseConvention::squared_error ? "squared_error" : "squared_se";
}

Eigen::VectorXd mse_ref(MseConvention convention, const Eigen::VectorXd& beta_star, const FittedGLM& fit) {
  if (convention == MseConvention::squared_se) return fit.covariance.diagonal();
  if (beta_star.size() != fit.beta.size()) throw ModelError("mse_ref: coefficient vectors differ in length");
  return (beta_star - fit.beta).array().square();
}

void ModelMetricInputs::validate() const {
  const auto k = beta_star.size();
  if (k < 2) throw ModelError("model metrics need an intercept and at least one coefficient");
  if (beta_hat_ref.size() != k || mse_ref.size() != k) throw ModelError("model metrics: vectors differ in length");
  if (beta_runs.empty()) throw ModelError("model metrics: no runs");
  for (const auto& b : beta_runs)
    if (b.size() != k) throw ModelError("model metrics: run vector has wrong length");
  for (Eigen::Index j = 0; j < k; ++j)
    if (!(mse_ref[j] > 0.0)) throw ModelError("model metrics: reference MSE of coefficient " + std::to_string(j) + " is not positive");
}

double m1(const ModelMetricInputs& in) {
  in.validate();
  double s = 0.0;
  for (const auto& run : in.beta_runs) s += ((in.beta_star - run).array().square() / in.mse_ref.array()).sum();
  return s / static_cast<double>(in.beta_runs.size()) / static_cast<double>(in.d());
}

double m2(const ModelMetricInputs& in) {
  in.validate();
  const auto d = static_cast<Eigen::Index>(in.d());
  double s = 0.0;
  for (Eigen::Index j = 1; j <= d; ++j) {
    double spread = 0.0;
    for (const auto& run : in.beta_runs) spread += (in.beta_hat_ref[j] - run[j]) * (in.beta_hat_ref[j] - run[j]);
    spread /= static_cast<double>(in.beta_runs.size());
    s += (in.mse_ref[j] + spread) / in.mse_ref[j];
  }
  return s / static_cast<double>(d);
}

}  // namespace actugen

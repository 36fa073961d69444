#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "actugen/error.hpp"
#include "actugen/metrics.hpp"
#include "actugen/surrogate.hpp"
#include "support.hpp"

using namespace actugen;
using testing::categorical;
using testing::numeric;

namespace {

Dataset two_categoricals(std::vector<double> a, std::vector<double> b) {
  return Dataset(Schema({categorical("u", {"a", "b"}), categorical("v", {"x", "y"})}), {std::move(a), std::move(b)});
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("error summaries of hand cases") {
  const auto e = compare_values(std::vector<double>{0.5, 0.5}, std::vector<double>{0.4, 0.6});
  CHECK(std::fabs(e.mae - 0.1) < 1e-12);
  CHECK(std::fabs(e.mape - 0.208333333333333) < 1e-9);
  CHECK(e.mape_keep == e.mape);
  CHECK(e.zero_denominators == 0);

  const auto z = compare_values(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0});
  CHECK(z.zero_denominators == 1);
  CHECK(z.mape == 0.5);
  CHECK(std::isinf(z.mape_keep));
  const auto both_zero = compare_values(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0});
  CHECK(both_zero.mape_keep == 0.0);

  CHECK_THROWS_AS(compare_values(std::vector<double>{1.0}, std::vector<double>{}), ConfigError);
}

TEST_CASE("MAPE is not symmetric") {
  const std::vector<double> r{0.5, 0.5}, h{0.25, 0.75};
  CHECK(compare_values(r, h).mae == compare_values(h, r).mae);
  CHECK(compare_values(r, h).mape != compare_values(h, r).mape);
}

TEST_CASE("marginal and pairwise ratios") {
  const auto train = two_categoricals({0, 0, 1, 1}, {0, 1, 0, 1});
  const auto syn = two_categoricals({0, 0, 1, 1}, {0, 0, 0, 1});
  const auto t = RatioTable::build(train, syn);
  CHECK(t.n_variables() == 2);
  CHECK(marginal_mae_mape(t, 0).mae == 0.0);
  CHECK(marginal_mae_mape(t, 1).mae == 0.25);
  const auto p = pairwise_mae_mape(t, 0, 1);
  CHECK(p.mae == 0.125);
  CHECK(p.zero_denominators == 1);
  CHECK(pairwise_mae_mape(t, 1, 0).mae == p.mae);
  CHECK_THROWS_AS(pairwise_mae_mape(t, 1, 1), ConfigError);
}

TEST_CASE("features empty in both datasets are dropped") {
  const Schema s({categorical("u", {"a", "b", "c"})});
  const Dataset train(s, {{0, 0, 1, 1}});
  const Dataset syn(s, {{0, 1, 1, 1}});
  const auto t = RatioTable::build(train, syn);
  const auto e = marginal_mae_mape(t, 0);
  CHECK(e.terms == 2);
  CHECK(e.mae == 0.25);
  CHECK(e.zero_denominators == 0);
}

TEST_CASE("correlation errors") {
  const Schema s({numeric("x"), numeric("y")});
  const Dataset train(s, {{1, 2, 3, 4}, {1, 2, 3, 4}});
  const Dataset syn(s, {{1, 2, 3, 4}, {1, 2, 4, 3}});
  CHECK(std::fabs(*pearson(syn.column(0), syn.column(1)) - 0.8) < 1e-12);
  const auto c = correlation_mae_mape(RatioTable::build(train, syn, 2));
  CHECK(std::fabs(c.error.mae - 0.2) < 1e-12);
  CHECK(std::fabs(c.error.mape - 0.25) < 1e-12);
  CHECK(c.excluded.empty());

  const Dataset flat(s, {{1, 2, 3, 4}, {5, 5, 5, 5}});
  CHECK_FALSE(pearson(flat.column(0), flat.column(1)).has_value());
  const auto d = correlation_mae_mape(RatioTable::build(train, flat, 2));
  CHECK(d.excluded.size() == 1);
  CHECK(d.error.terms == 0);
}

TEST_CASE("identical datasets score zero and metrics ignore row order") {
  const auto train = surrogate_portfolio(3000, 4);
  const auto m = dataset_metrics(train, train);
  CHECK(m.categorical_mae == 0.0);
  CHECK(m.numeric_mae == 0.0);
  CHECK(m.pairwise_mae == 0.0);
  CHECK(m.correlation_mae == 0.0);
  CHECK(m.categorical_mape == 0.0);
  CHECK(m.pairwise_mape == 0.0);

  const auto syn = surrogate_portfolio(2500, 5);
  std::vector<std::size_t> perm(2500);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  const auto a = dataset_metrics(train, syn);
  const auto b = dataset_metrics(train, syn.select_rows(perm));
  CHECK(a.categorical_mae == b.categorical_mae);
  CHECK(a.numeric_mape == b.numeric_mape);
  CHECK(a.pairwise_mae == doctest::Approx(b.pairwise_mae).epsilon(1e-14));
  CHECK(a.correlation_mae == doctest::Approx(b.correlation_mae).epsilon(1e-10));
  CHECK(a.categorical_mae > 0.0);
}

TEST_CASE("categorical marginal MAE against a direct count") {
  const auto train = surrogate_portfolio(2000, 6);
  const auto syn = surrogate_portfolio(1500, 7);
  const auto t = RatioTable::build(train, syn);
  for (std::size_t v = 0; v < t.n_variables(); ++v) {
    const auto& var = t.bins.variables[v];
    if (var.kind != ColumnKind::categorical) continue;
    std::map<double, double> r, h;
    for (double c : train.column(var.column)) r[c] += 1.0 / 2000.0;
    for (double c : syn.column(var.column)) h[c] += 1.0 / 1500.0;
    std::map<double, int> keys;
    for (auto& [k, _] : r) keys[k] = 1;
    for (auto& [k, _] : h) keys[k] = 1;
    double sum = 0.0;
    for (auto& [k, _] : keys) sum += std::fabs(r[k] - h[k]);
    CHECK(marginal_mae_mape(t, v).mae == doctest::Approx(sum / static_cast<double>(keys.size())).epsilon(1e-12));
  }
}

TEST_CASE("model metrics") {
  ModelMetricInputs in;
  in.beta_star = vec({0, 0, 0});
  in.beta_hat_ref = vec({0, 0, 0});
  in.mse_ref = vec({1, 1, 1});
  in.beta_runs = {vec({1, 1, 1})};
  CHECK(in.d() == 2);
  CHECK(m1(in) == 1.5);
  CHECK(m2(in) == 2.0);

  SUBCASE("identities") {
    ModelMetricInputs id;
    id.beta_star = vec({-3.0, 0.5, 0.2});
    id.beta_hat_ref = vec({-2.9, 0.45, 0.25});
    id.mse_ref = (id.beta_star - id.beta_hat_ref).array().square();
    id.beta_runs = {id.beta_star, id.beta_star};
    CHECK(m1(id) == 0.0);
    id.beta_runs = {id.beta_hat_ref};
    CHECK(m2(id) == doctest::Approx(1.0).epsilon(1e-15));
    // Literal sum over j = 0..d divided by d.
    CHECK(m1(id) == doctest::Approx(3.0 / 2.0).epsilon(1e-12));
  }
  SUBCASE("validation") {
    ModelMetricInputs bad = in;
    bad.mse_ref[1] = 0.0;
    CHECK_THROWS_AS(m1(bad), ModelError);
    bad = in;
    bad.beta_runs.clear();
    CHECK_THROWS_AS(m2(bad), ModelError);
    bad = in;
    bad.beta_star = vec({1});
    bad.beta_hat_ref = vec({1});
    bad.mse_ref = vec({1});
    bad.beta_runs = {vec({1})};
    CHECK_THROWS_AS(m1(bad), ModelError);
  }
}

TEST_CASE("reference MSE conventions") {
  FittedGLM fit;
  fit.beta = vec({1.0, 2.0});
  fit.covariance = Eigen::MatrixXd::Identity(2, 2) * 0.04;
  const auto se = mse_ref(MseConvention::squared_se, vec({0, 0}), fit);
  CHECK(se[0] == 0.04);
  const auto sq = mse_ref(MseConvention::squared_error, vec({0.5, 2.5}), fit);
  CHECK(sq[0] == 0.25);
  CHECK(sq[1] == 0.25);
  CHECK(parse_mse_convention("squared_se") == MseConvention::squared_se);
  CHECK(to_string(MseConvention::squared_error) == "squared_error");
  CHECK_THROWS_AS(parse_mse_convention("abs"), ConfigError);
}

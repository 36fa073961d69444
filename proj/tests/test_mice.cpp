#include <doctest.h>

#include <random>
#include <set>

#include "actugen/error.hpp"
#include "actugen/mice.hpp"
#include "actugen/surrogate.hpp"
#include "support.hpp"

using namespace actugen;
using testing::categorical;
using testing::numeric;

namespace {

Dataset small_mixed(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm;
  std::uniform_int_distribution<int> lvl(0, 2);
  std::poisson_distribution<int> pois(0.3);
  std::vector<double> y, c, x;
  for (std::size_t i = 0; i < n; ++i) {
    c.push_back(lvl(gen));
    x.push_back(std::round(10.0 * norm(gen) + 5.0 * c.back()) / 10.0);
    y.push_back(pois(gen));
  }
  return Dataset(Schema({numeric("y", ColumnRole::response), categorical("c", {"a", "b", "c"}), numeric("x")}),
                 {y, c, x});
}

void check_donor_closure(const Dataset& train, const Dataset& syn) {
  REQUIRE(syn.n_rows() == train.n_rows());
  REQUIRE(syn.schema() == train.schema());
  for (std::size_t j = 0; j < train.n_cols(); ++j) {
    const auto col = train.column(j);
    const std::set<double> observed(col.begin(), col.end());
    std::size_t outside = 0;
    for (double v : syn.column(j)) outside += observed.count(v) ? 0 : 1;
    CHECK(outside == 0);
  }
}

MiceParams quick() {
  MiceParams p;
  p.iterations = 2;
  p.forest.n_trees = 4;
  return p;
}

}  // namespace

TEST_CASE("missing mask bookkeeping") {
  MissingMask m(3, 2);
  m.set(0, 1);
  m.set(2, 1);
  CHECK(m.count() == 2);
  CHECK(m.count_in_column(1) == 2);
  CHECK(m.masked_rows(1) == std::vector<std::size_t>{0, 2});
  CHECK(m.observed_rows(1) == std::vector<std::size_t>{1});
  CHECK(m(2, 1));
  CHECK(m.cell(1 * 3 + 2));
}

TEST_CASE("initial imputation") {
  const auto ds = small_mixed(20, 1);
  SUBCASE("empty mask is the identity") {
    CHECK(initial_impute(ds, MissingMask(20, 3), 4) == ds);
    CHECK(mice_cycle(ds, MissingMask(20, 3), quick(), 4) == ds);
    MiceParams one = quick();
    one.iterations = 1;
    CHECK(run_mice(ds, MissingMask(20, 3), one, 4) == ds);
  }
  SUBCASE("fills from observed support") {
    const Dataset two(Schema({numeric("v")}), {{1, 2, 1, 7}});
    MissingMask m(4, 1);
    m.set(3, 0);
    for (std::uint64_t s = 0; s < 30; ++s) {
      const double v = initial_impute(two, m, s).at(3, 0);
      CHECK((v == 1.0 || v == 2.0));
    }
  }
  SUBCASE("fully masked column is an error") {
    MissingMask m(20, 3);
    for (std::size_t i = 0; i < 20; ++i) m.set(i, 2);
    CHECK_THROWS_AS(initial_impute(ds, m, 1), DataError);
  }
}

TEST_CASE("cycle on a constant column returns the constant") {
  auto ds = small_mixed(30, 2);
  ds = ds.with_column(2, std::vector<double>(30, 4.5));
  MissingMask m(30, 3);
  m.set(7, 2);
  CHECK(run_mice(ds, m, quick(), 3).at(7, 2) == 4.5);
}

TEST_CASE("single-column mask converges in one cycle") {
  // Only one column is masked, so the cycle's forest sees unchanged
  // predictors and the placeholders have no influence on the result.
  const auto ds = small_mixed(300, 3);
  MissingMask m(300, 3);
  for (std::size_t i = 0; i < 300; i += 3) m.set(i, 2);
  const auto a = mice_cycle(initial_impute(ds, m, 10), m, quick(), 77);
  const auto b = mice_cycle(initial_impute(ds, m, 11), m, quick(), 77);
  CHECK(a == b);
}

TEST_CASE("imputed marginals of independent noise match observed ones (KS)") {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> norm;
  std::vector<double> a, b, c;
  for (int i = 0; i < 10000; ++i) {
    a.push_back(norm(gen));
    b.push_back(norm(gen));
    c.push_back(norm(gen));
  }
  const Dataset ds(Schema({numeric("a"), numeric("b"), numeric("c")}), {a, b, c});
  MissingMask m(10000, 3);
  for (std::size_t i = 0; i < 10000; i += 2) m.set(i, 0);  // 5k cells
  MiceParams p = quick();
  p.iterations = 2;
  const auto out = run_mice(ds, m, p, 5);
  std::vector<double> imputed, observed;
  for (std::size_t i = 0; i < 10000; ++i) (m(i, 0) ? imputed : observed).push_back(out.at(i, 0));
  CHECK(testing::ks_two_sample(imputed, observed).p > 0.001);
}

TEST_CASE("masked counts are imputed as observed count values") {
  const auto ds = small_mixed(400, 4);
  const auto mask = ampute_random_cells(ds, 0.5, 8);
  const auto out = run_mice(ds, mask, quick(), 9);
  const auto y = ds.column(0);
  const std::set<double> support(y.begin(), y.end());
  for (std::size_t i = 0; i < 400; ++i) {
    CHECK(support.count(out.at(i, 0)) == 1);
    if (!mask(i, 1) && !mask(i, 2) && !mask(i, 0)) CHECK(out.at(i, 2) == ds.at(i, 2));
  }
}

TEST_CASE("random amputation") {
  const Dataset four(Schema({numeric("a")}), {{1, 2, 3, 4}});
  const auto m = ampute_random_cells(four, 0.75, 1);
  CHECK(m.count() == 3);
  const Dataset square(Schema({numeric("a"), numeric("b")}), {{1, 2}, {3, 4}});
  CHECK_THROWS_AS(ampute_random_cells(square, 0.75, 1), DataError);
  CHECK(ampute_random_cells(four, 0.5, 9) == ampute_random_cells(four, 0.5, 9));
  const Dataset one_row(Schema({numeric("a"), numeric("b")}), {{1}, {2}});
  CHECK_THROWS_AS(ampute_random_cells(one_row, 0.5, 1), DataError);
  CHECK_THROWS_AS(ampute_random_cells(four, 1.0, 1), ConfigError);
  const auto ds = small_mixed(100, 5);
  CHECK(ampute_random_cells(ds, 0.2, 3).count() == 60);
}

TEST_CASE("mice method generator") {
  const Dataset toy(Schema({numeric("a"), categorical("b", {"x", "y"})}), {{1, 2, 3, 4}, {0, 1, 0, 1}});
  MiceParams p = quick();
  p.forest.min_leaf = 1;
  const auto syn = gen_mice_method(toy, p, 3);
  CHECK(syn.data.n_rows() == 4);
  CHECK(syn.data.n_cols() == 2);
  CHECK(syn.regenerated.count() == 6);
  check_donor_closure(toy, syn.data);
  // cells outside the mask are copied verbatim
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < 4; ++i)
      if (!syn.regenerated(i, j)) CHECK(syn.data.at(i, j) == toy.at(i, j));

  const auto ds = small_mixed(300, 6);
  const auto a = gen_mice_method(ds, quick(), 10);
  const auto b = gen_mice_method(ds, quick(), 10);
  CHECK(a.data == b.data);
  check_donor_closure(ds, a.data);
}

TEST_CASE("all-synthetic generator regenerates every cell") {
  const auto ds = small_mixed(200, 7);
  const auto syn = gen_mice_all_syn(ds, quick(), 4);
  CHECK(syn.regenerated.count() == 200 * 3);
  REQUIRE(syn.passes.size() == 2);
  for (std::size_t c = 0; c < 600; ++c) CHECK(syn.passes[0].cell(c) != syn.passes[1].cell(c));
  check_donor_closure(ds, syn.data);
}

TEST_CASE("tabulator rounds") {
  SUBCASE("disjoint 20% rounds") {
    const auto ds = small_mixed(100, 8);
    const auto syn = gen_mice_tabulator(ds, quick(), 3, 5, 0.2, true);
    REQUIRE(syn.passes.size() == 5);
    MissingMask acc(100, 3);
    for (std::size_t r = 0; r < 5; ++r) {
      CHECK(syn.passes[r].count() == 60);
      for (std::size_t c = 0; c < 300; ++c)
        if (syn.passes[r].cell(c)) {
          CHECK_FALSE(acc.cell(c));
          acc.set_cell(c);
        }
      CHECK(acc.count() == 60 * (r + 1));
    }
    CHECK(syn.regenerated.count() == 300);
    check_donor_closure(ds, syn.data);
  }
  SUBCASE("2x2 toy in four single-cell rounds") {
    const Dataset toy(Schema({numeric("a"), numeric("b")}), {{1, 2}, {3, 4}});
    MiceParams p = quick();
    p.forest.min_leaf = 1;
    const auto syn = gen_mice_tabulator(toy, p, 5, 4, 0.25, true);
    CHECK(syn.regenerated.count() == 4);
    for (const auto& pass : syn.passes) CHECK(pass.count() == 1);
  }
  SUBCASE("independent rounds") {
    const auto ds = small_mixed(100, 9);
    const auto syn = gen_mice_tabulator(ds, quick(), 3, 3, 0.2, false);
    for (const auto& pass : syn.passes) CHECK(pass.count() == 60);
    CHECK(syn.regenerated.count() <= 180);
    check_donor_closure(ds, syn.data);
  }
}

TEST_CASE("generator dispatch and plan validation") {
  CHECK(parse_generator_kind("mice") == GeneratorKind::mice_method);
  CHECK(parse_generator_kind("mice_tabulator") == GeneratorKind::mice_tabulator);
  CHECK_THROWS_AS(parse_generator_kind("gan"), ConfigError);
  const auto plan = AmputationPlan::defaults(GeneratorKind::mice_tabulator);
  CHECK(plan.cell_fraction == 0.2);
  CHECK(plan.rounds == 5);
  AmputationPlan bad;
  bad.cell_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("portfolio generation keeps schema, row count and donor closure") {
  const auto train = surrogate_portfolio(1500, 3);
  for (auto kind : {GeneratorKind::mice_method, GeneratorKind::mice_all_syn, GeneratorKind::mice_tabulator}) {
    const auto syn = generate_synthetic(train, AmputationPlan::defaults(kind), quick(), 6);
    check_donor_closure(train, syn.data);
  }
}

TEST_CASE("constraint report counts violations") {
  auto ds = surrogate_portfolio(100, 2);
  auto age = std::vector<double>(ds.column("DRIVER_AGE").begin(), ds.column("DRIVER_AGE").end());
  age[0] = 16;
  age[1] = 17;
  ds = ds.with_column(ds.schema().index_of("DRIVER_AGE"), age);
  const auto r = constraint_report(ds);
  CHECK(r.driver_under_18 == 2);
}

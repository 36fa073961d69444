#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "actugen/error.hpp"
#include "actugen/surrogate.hpp"
#include "actugen/tabular.hpp"
#include "support.hpp"

using namespace actugen;
using testing::categorical;
using testing::numeric;

namespace {

Schema toy_schema() {
  return Schema({numeric("y", ColumnRole::response), categorical("area", {"A", "B", "C"}), numeric("age")});
}

Dataset toy() { return Dataset(toy_schema(), {{0, 1, 2, 0}, {0, 1, 2, 1}, {20.5, 31, 40, 55}}); }

}  // namespace

TEST_CASE("schema rejects malformed declarations") {
  CHECK_THROWS_AS(Schema({numeric("a"), numeric("a")}), DataError);
  CHECK_THROWS_AS(Schema({categorical("a", {})}), DataError);
  CHECK_THROWS_AS(Schema({categorical("a", {"x", "x"})}), DataError);
  CHECK_THROWS_AS(Schema({categorical("a", {"x", ""})}), DataError);
  CHECK_THROWS_AS(Schema({numeric("a", ColumnRole::response), numeric("b", ColumnRole::response)}), DataError);
  CHECK_THROWS_AS(Schema({numeric("a", ColumnRole::exposure), numeric("b", ColumnRole::exposure)}), DataError);
  CHECK_NOTHROW(Schema({numeric("a")}));
}

TEST_CASE("dataset validates cells") {
  const auto s = toy_schema();
  CHECK_THROWS_AS(Dataset(s, {{0, 1}, {0, 1}, {1.0}}), DataError);
  CHECK_THROWS_AS(Dataset(s, {{0}, {3}, {1.0}}), DataError);       // undeclared level code
  CHECK_THROWS_AS(Dataset(s, {{-1}, {0}, {1.0}}), DataError);      // negative response
  CHECK_THROWS_AS(Dataset(s, {{0.5}, {0}, {1.0}}), DataError);     // fractional response
  CHECK_THROWS_AS(Dataset(s, {{0}, {0}, {std::nan("")}}), DataError);
  const auto ds = toy();
  CHECK(ds.n_rows() == 4);
  CHECK(ds.label(2, 1) == "C");
}

TEST_CASE("fremtpl2 schema has five categorical and four numeric covariates") {
  const auto s = fremtpl2_schema();
  std::size_t cat = 0, num = 0;
  for (const auto& c : s.columns()) {
    if (c.role != ColumnRole::covariate) continue;
    (c.is_categorical() ? cat : num) += 1;
  }
  CHECK(cat == 5);
  CHECK(num == 4);
  CHECK(s[*s.response()].header() == "ClaimNb");
  CHECK(s[*s.exposure()].header() == "Exposure");
  CHECK(s[s.index_of("VEHICLE_POWER")].is_categorical());
}

TEST_CASE("csv parsing") {
  const auto s = toy_schema();
  SUBCASE("basic with quotes, CRLF and extra columns") {
    const auto ds = parse_csv("extra,y,area,age\r\nq,1,\"B\",30\r\nq,0,C,41.25\r\n", s);
    CHECK(ds.n_rows() == 2);
    CHECK(ds.label(0, 1) == "B");
    CHECK(ds.at(1, 2) == 41.25);
  }
  SUBCASE("empty file") { CHECK_THROWS_AS(parse_csv("", s), DataError); }
  SUBCASE("undeclared level names the row and column") {
    try {
      parse_csv("y,area,age\n0,A,1\n0,Z,2\n", s, {}, "f.csv");
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 2") != std::string::npos);
      CHECK(msg.find("area") != std::string::npos);
    }
  }
  SUBCASE("missing column") { CHECK_THROWS_AS(parse_csv("y,age\n0,1\n", s), DataError); }
  SUBCASE("unparseable number") { CHECK_THROWS_AS(parse_csv("y,area,age\n0,A,abc\n", s), DataError); }
  SUBCASE("semicolon delimiter") {
    const auto ds = parse_csv("y;area;age\n2;A;7\n", s, CsvOptions{';'});
    CHECK(ds.at(0, 0) == 2.0);
  }
}

TEST_CASE("csv round trip is exact") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  std::vector<double> ages;
  for (int i = 0; i < 200; ++i) ages.push_back(u(gen) / 3.0);
  std::vector<double> ys(200, 1.0), areas(200);
  for (int i = 0; i < 200; ++i) areas[static_cast<std::size_t>(i)] = i % 3;
  const Dataset ds(toy_schema(), {ys, areas, ages});
  CHECK(parse_csv(to_csv(ds), toy_schema()) == ds);
}

TEST_CASE("train/test split sizes and determinism") {
  const Schema s({numeric("x")});
  SUBCASE("n = 10") {
    std::vector<double> x(10);
    std::iota(x.begin(), x.end(), 0.0);
    const auto sp = split_train_test(Dataset(s, {x}), 0.9, 1);
    CHECK(sp.train.n_rows() == 9);
    CHECK(sp.test.n_rows() == 1);
  }
  SUBCASE("portfolio size") {
    const Dataset ds(s, {std::vector<double>(678013, 0.0)});
    const auto sp = split_train_test(ds, 0.9, 11);
    CHECK(sp.train.n_rows() == 610211);
    CHECK(sp.test.n_rows() == 67802);
    std::vector<bool> seen(678013, false);
    for (auto r : sp.train_rows) seen[r] = true;
    for (auto r : sp.test_rows) {
      CHECK_FALSE(seen[r]);
      seen[r] = true;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
  SUBCASE("same seed, same split") {
    std::vector<double> x(100);
    std::iota(x.begin(), x.end(), 0.0);
    const Dataset ds(s, {x});
    CHECK(split_train_test(ds, 0.7, 3).train_rows == split_train_test(ds, 0.7, 3).train_rows);
    CHECK(split_train_test(ds, 0.7, 3).train_rows != split_train_test(ds, 0.7, 4).train_rows);
  }
  SUBCASE("bad fraction") {
    const Dataset ds(s, {{1.0, 2.0}});
    CHECK_THROWS_AS(split_train_test(ds, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(split_train_test(ds, 0.0, 1), ConfigError);
  }
}

TEST_CASE("one-hot and dummy encodings") {
  const auto ds = toy();  // area = A, B, C, B
  const auto oh = one_hot(ds, 1);
  CHECK(oh.cols() == 3);
  CHECK(oh(1, 0) == 0.0);
  CHECK(oh(1, 1) == 1.0);
  CHECK(oh(1, 2) == 0.0);
  for (Eigen::Index i = 0; i < oh.rows(); ++i) CHECK(oh.row(i).sum() == 1.0);

  const auto dm = dummy_encode(ds, 1, "A");
  CHECK(dm.cols() == 2);
  CHECK(dm.row(0).sum() == 0.0);  // value A
  CHECK(dm(2, 0) == 0.0);         // value C -> (0, 1)
  CHECK(dm(2, 1) == 1.0);
  CHECK_THROWS_AS(dummy_encode(ds, 1, "Q"), DataError);

  const Dataset single(Schema({categorical("c", {"only"})}), {{0, 0, 0}});
  CHECK(one_hot(single, 0).isOnes());
  const Dataset two(Schema({categorical("g", {"Diesel", "Regular"})}), {{0, 1, 1}});
  CHECK(dummy_encode(two, 0, "Regular").cols() == 1);
}

TEST_CASE("default reference level: most frequent, ties alphabetical") {
  const Dataset ds(Schema({categorical("c", {"Z", "B", "A"})}), {{0, 1, 2, 0, 2}});
  CHECK(default_reference_level(ds, 0) == "A");
  const Dataset ds2(Schema({categorical("c", {"Z", "B", "A"})}), {{0, 0, 2}});
  CHECK(default_reference_level(ds2, 0) == "Z");
}

namespace {
std::vector<double> masses(const NumericBins& b, const std::vector<double>& v) {
  std::vector<double> m(b.n_bins(), 0.0);
  for (double x : v) m[b.bin_of(x)] += 1.0 / static_cast<double>(v.size());
  return m;
}
}  // namespace

TEST_CASE("quantile bins") {
  SUBCASE("symmetric") {
    const std::vector<double> v{1, 2, 3, 4};
    const auto b = quantile_bins(v, 2);
    REQUIRE(b.cuts.size() == 1);
    CHECK(b.cuts[0] == 2.5);
    CHECK(masses(b, v) == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("constant column") {
    const std::vector<double> v{7, 7, 7};
    const auto b = quantile_bins(v, 10);
    CHECK(b.n_bins() == 1);
  }
  SUBCASE("value spanning quantiles gets its own bin") {
    const std::vector<double> v{1, 1, 1, 2};
    const auto b = quantile_bins(v, 2);
    CHECK(masses(b, v) == std::vector<double>{0.75, 0.25});
  }
  SUBCASE("heavy atom inside the range is a singleton") {
    std::vector<double> v;
    for (int i = 0; i < 20; ++i) v.push_back(i);
    for (int i = 0; i < 60; ++i) v.push_back(50);
    for (int i = 0; i < 20; ++i) v.push_back(100 + i);
    const auto b = quantile_bins(v, 10);
    const auto k = b.bin_of(50);
    CHECK(b.bin_of(19) != k);
    CHECK(b.bin_of(100) != k);
    CHECK(masses(b, v)[k] == doctest::Approx(0.6));
  }
  SUBCASE("random columns: increasing cuts, total mass 1, no empty training bin") {
    std::mt19937_64 gen(9);
    for (int rep = 0; rep < 30; ++rep) {
      std::poisson_distribution<int> pois(1 + rep);
      std::vector<double> v;
      for (int i = 0; i < 500; ++i) v.push_back(pois(gen));
      const auto b = quantile_bins(v, 10);
      CHECK(std::is_sorted(b.cuts.begin(), b.cuts.end()));
      CHECK(std::adjacent_find(b.cuts.begin(), b.cuts.end()) == b.cuts.end());
      const auto m = masses(b, v);
      CHECK(std::accumulate(m.begin(), m.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      for (double x : m) CHECK(x > 0.0);
    }
  }
  CHECK_THROWS_AS(quantile_bins(std::vector<double>{}, 2), DataError);
  CHECK_THROWS_AS(quantile_bins(std::vector<double>{1.0}, 0), ConfigError);
}

TEST_CASE("concat, select and unit exposure") {
  const auto ds = toy();
  const auto both = concat_rows(ds, ds);
  CHECK(both.n_rows() == 8);
  const std::vector<std::size_t> rows{3, 0};
  const auto sel = ds.select_rows(rows);
  CHECK(sel.at(0, 2) == 55.0);
  CHECK(sel.at(1, 2) == 20.5);
  const Dataset other(Schema({numeric("x")}), {{1.0}});
  CHECK_THROWS_AS(concat_rows(ds, other), DataError);

  const Dataset ex(Schema({numeric("e", ColumnRole::exposure)}), {{0.5, 0.25}});
  const auto u = with_unit_exposure(ex);
  CHECK(u.at(0, 0) == 1.0);
  CHECK(u.at(1, 0) == 1.0);
}

TEST_CASE("surrogate portfolio reproduces published level counts") {
  const auto ds = surrogate_portfolio();
  CHECK(ds.n_rows() == 678013);
  auto count = [&](const char* col, std::size_t level) {
    const auto v = ds.column(col);
    return std::count(v.begin(), v.end(), static_cast<double>(level));
  };
  CHECK(count("AREA", 0) == 103957);
  CHECK(count("AREA", 2) == 191880);
  CHECK(count("VEHICLE_POWER", 0) == 115349);
  CHECK(count("VEHICLE_POWER", 11) == 2926);
  CHECK(count("VEHICLE_BRAND", 8) == 166024);
  CHECK(count("VEHICLE_GAS", 0) == 332136);
  CHECK(surrogate_portfolio(1000, 4) == surrogate_portfolio(1000, 4));
}

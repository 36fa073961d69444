#include <doctest.h>

#include <gsl/gsl_cdf.h>

#include <map>
#include <random>
#include <set>

#include "actugen/error.hpp"
#include "actugen/forest.hpp"
#include "actugen/rng.hpp"

using namespace actugen;

namespace {

struct Toy {
  std::vector<double> x0, x1, y;
  std::vector<FeatureColumn> features() const {
    return {FeatureColumn{x0, false, 0}, FeatureColumn{x1, true, 4}};
  }
};

Toy random_toy(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm;
  std::uniform_int_distribution<int> lvl(0, 3);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    t.x0.push_back(norm(gen));
    t.x1.push_back(lvl(gen));
    t.y.push_back(t.x0.back() > 0 ? 2.0 + t.x1.back() : static_cast<double>(lvl(gen)));
  }
  return t;
}

bool same_structure(const Forest& a, const Forest& b) {
  if (a.trees().size() != b.trees().size()) return false;
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    const auto& na = a.trees()[t].nodes;
    const auto& nb = b.trees()[t].nodes;
    if (na.size() != nb.size()) return false;
    for (std::size_t k = 0; k < na.size(); ++k) {
      if (na[k].feature != nb[k].feature || na[k].threshold != nb[k].threshold ||
          na[k].left_levels != nb[k].left_levels || na[k].donor_rows != nb[k].donor_rows)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("constant target gives single-leaf trees") {
  const auto t = random_toy(200, 1);
  const std::vector<double> y(200, 4.0);
  const auto f = t.features();
  const auto forest = fit_forest(f, y, TargetKind::numeric, {}, {}, 7);
  CHECK(forest.trees().size() == 10);
  for (const auto& tree : forest.trees()) CHECK(tree.nodes.size() == 1);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(draw_donor(forest, std::vector<double>{0.3, 1.0}, rng) == 4.0);
}

TEST_CASE("separable one-split problem is learned exactly") {
  std::vector<double> x, y;
  for (int i = 0; i < 500; ++i) {
    x.push_back(-1.0);
    y.push_back(0.0);
    x.push_back(1.0);
    y.push_back(1.0);
  }
  const std::vector<FeatureColumn> f{{x, false, 0}};
  ForestParams p;
  p.max_depth = 1;
  const auto forest = fit_forest(f, y, TargetKind::categorical, {}, p, 3);
  for (std::size_t tr = 0; tr < forest.trees().size(); ++tr)
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& leaf = forest.leaf(tr, f, i);
      for (auto d : leaf.donor_rows) CHECK(forest.target_of(d) == y[i]);
    }
}

TEST_CASE("same seed, same forest") {
  const auto t = random_toy(300, 2);
  const auto f = t.features();
  const auto a = fit_forest(f, t.y, TargetKind::numeric, {}, {}, 11);
  const auto b = fit_forest(f, t.y, TargetKind::numeric, {}, {}, 11);
  const auto c = fit_forest(f, t.y, TargetKind::numeric, {}, {}, 12);
  CHECK(same_structure(a, b));
  CHECK_FALSE(same_structure(a, c));
}

TEST_CASE("leaf invariants and routing consistency") {
  const auto t = random_toy(400, 4);
  const auto f = t.features();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 400; i += 2) rows.push_back(i);
  for (auto kind : {TargetKind::numeric, TargetKind::categorical}) {
    ForestParams p;
    p.min_leaf = 5;
    const auto forest = fit_forest(f, t.y, kind, rows, p, 5);
    const std::set<std::size_t> allowed(rows.begin(), rows.end());
    for (std::size_t tr = 0; tr < forest.trees().size(); ++tr) {
      const auto& nodes = forest.trees()[tr].nodes;
      for (const auto& node : nodes) {
        if (!node.is_leaf()) {
          CHECK(node.left >= 0);
          CHECK(node.right >= 0);
          if (!node.left_levels.empty()) {
            // proper non-empty subset
            std::size_t left = 0;
            for (auto b : node.left_levels) left += b;
            CHECK(left > 0);
            CHECK(left < node.left_levels.size());
          }
          continue;
        }
        CHECK(node.donor_rows.size() >= p.min_leaf);
        for (auto d : node.donor_rows) {
          CHECK(allowed.count(d) == 1);
          // a donor routed through the tree lands in its own leaf
          CHECK(&forest.leaf(tr, f, d) == &node);
        }
      }
    }
  }
}

TEST_CASE("donor draws stay in the observed target set") {
  const auto t = random_toy(300, 6);
  const auto f = t.features();
  const std::set<double> observed(t.y.begin(), t.y.end());
  const auto forest = fit_forest(f, t.y, TargetKind::categorical, {}, {}, 9);
  Rng rng(2);
  for (std::size_t i = 0; i < 300; ++i) {
    const double v = forest.target_of(draw_donor_row(forest, f, i, rng));
    CHECK(observed.count(v) == 1);
  }
}

TEST_CASE("single donor always returned") {
  const std::vector<double> x{0.5}, y{3.0};
  const std::vector<FeatureColumn> f{{x, false, 0}};
  ForestParams p;
  p.min_leaf = 1;
  const auto forest = fit_forest(f, y, TargetKind::numeric, {}, p, 1);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) CHECK(draw_donor(forest, std::vector<double>{9.0}, rng) == 3.0);
}

TEST_CASE("categorical donor frequencies match the leaf (chi-square)") {
  // A constant predictor admits no split, so the single tree is one leaf
  // holding its bootstrap sample.
  std::vector<double> x(400, 1.0), y;
  for (int i = 0; i < 400; ++i) y.push_back(i % 10 < 5 ? 0.0 : (i % 10 < 8 ? 1.0 : 2.0));
  const std::vector<FeatureColumn> f{{x, false, 0}};
  ForestParams p;
  p.n_trees = 1;
  const auto forest = fit_forest(f, y, TargetKind::categorical, {}, p, 21);
  const auto& leaf = forest.trees()[0].nodes[0];
  REQUIRE(leaf.is_leaf());
  std::map<double, double> expected;
  for (auto d : leaf.donor_rows) expected[forest.target_of(d)] += 1.0 / static_cast<double>(leaf.donor_rows.size());

  const int draws = 10000;
  std::map<double, double> seen;
  Rng rng(33);
  for (int i = 0; i < draws; ++i) seen[draw_donor(forest, std::vector<double>{1.0}, rng)] += 1.0;
  double chi2 = 0.0;
  for (const auto& [level, prob] : expected) {
    const double e = prob * draws;
    chi2 += (seen[level] - e) * (seen[level] - e) / e;
  }
  CHECK(seen.size() == expected.size());
  const double df = static_cast<double>(expected.size() - 1);
  CHECK(gsl_cdf_chisq_Q(chi2, df) > 0.001);
}

TEST_CASE("unseen categorical level is routed without failing") {
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(i % 2);
    y.push_back(i % 2 ? 5.0 : 1.0);
  }
  const std::vector<FeatureColumn> f{{x, true, 3}};
  const auto forest = fit_forest(f, y, TargetKind::numeric, {}, {}, 2);
  Rng rng(1);
  const double v = draw_donor(forest, std::vector<double>{2.0}, rng);
  CHECK((v == 1.0 || v == 5.0));
}

TEST_CASE("empty training set is an error") {
  const std::vector<double> x, y;
  const std::vector<FeatureColumn> f{{x, false, 0}};
  CHECK_THROWS_AS(fit_forest(f, y, TargetKind::numeric, {}, {}, 1), ModelError);
}

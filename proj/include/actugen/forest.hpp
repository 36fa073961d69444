#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "actugen/rng.hpp"

namespace actugen {

enum class TargetKind { numeric, categorical };

struct ForestParams {
  std::size_t n_trees = 10;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;           // 0 = unrestricted
  std::size_t features_per_split = 0;  // 0 = ceil(sqrt(p))
};

// One predictor column. Categorical cells hold level codes < n_levels.
struct FeatureColumn {
  std::span<const double> values;
  bool categorical = false;
  std::size_t n_levels = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;                 // numeric split: x <= threshold goes left
  std::vector<unsigned char> left_levels; // categorical split: per level code
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> donor_rows;  // leaf only; source row indices, with bootstrap multiplicity

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

// CART ensemble used as a donor model: each tree is grown on its own
// bootstrap of the supplied rows; leaves remember which rows reached them.
class Forest {
 public:
  const std::vector<Tree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  TargetKind target_kind() const { return kind_; }
  std::size_t n_features() const { return feature_kinds_.size(); }

  // Leaf reached in `tree` by a row whose predictor values are `row`.
  const TreeNode& leaf(std::size_t tree, std::span<const double> row) const;
  // Same, reading predictor values at index `row` of `features`.
  const TreeNode& leaf(std::size_t tree, std::span<const FeatureColumn> features, std::size_t row) const;

  double target_of(std::uint32_t source_row) const { return target_[source_row]; }

 private:
  friend Forest fit_forest(std::span<const FeatureColumn>, std::span<const double>, TargetKind,
                           std::span<const std::size_t>, const ForestParams&, std::uint64_t);
  std::vector<Tree> trees_;
  ForestParams params_;
  TargetKind kind_ = TargetKind::numeric;
  std::vector<bool> feature_kinds_;  // true = categorical
  std::vector<double> target_;       // indexed by source row

  template <class Get>
  const TreeNode& route(std::size_t tree, Get&& value_of) const;
};

// Fits on `rows` (all rows when empty). Numeric targets split on variance
// reduction, categorical targets on Gini impurity; categorical targets may
// be any numeric coding (classes are the distinct values). Throws ModelError
// on an empty training set.
Forest fit_forest(std::span<const FeatureColumn> features, std::span<const double> target, TargetKind kind,
                  std::span<const std::size_t> rows, const ForestParams& params, std::uint64_t seed);

// Picks a tree uniformly, routes the row, and returns a donor drawn
// uniformly from the leaf: its source row index, or its target value.
std::uint32_t draw_donor_row(const Forest& forest, std::span<const double> row, Rng& rng);
std::uint32_t draw_donor_row(const Forest& forest, std::span<const FeatureColumn> features, std::size_t row,
                             Rng& rng);
double draw_donor(const Forest& forest, std::span<const double> row, Rng& rng);

}  // namespace actugen

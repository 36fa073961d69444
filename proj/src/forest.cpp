#include "actugen/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "actugen/error.hpp"

namespace actugen {

namespace {

// Supplied rows re-indexed 0..m-1 ("local" rows) with every feature reduced
// to integer codes: level codes for categorical features, ranks among the
// distinct values for numeric ones.
struct Prepared {
  std::size_t m = 0;
  std::vector<std::uint32_t> source;  // local -> source row
  struct Feature {
    bool categorical = false;
    std::size_t n_codes = 0;
    std::vector<std::uint32_t> code;  // per local row
    std::vector<double> distinct;     // numeric only, ascending
  };
  std::vector<Feature> features;
  bool categorical_target = false;
  std::size_t n_classes = 0;
  std::vector<double> y;              // numeric target per local row
  std::vector<std::uint32_t> cls;     // class per local row
};

Prepared prepare(std::span<const FeatureColumn> features, std::span<const double> target, TargetKind kind,
                 std::span<const std::size_t> rows) {
  Prepared p;
  if (rows.empty()) {
    p.source.resize(target.size());
    std::iota(p.source.begin(), p.source.end(), std::uint32_t{0});
  } else {
    p.source.reserve(rows.size());
    for (auto r : rows) {
      if (r >= target.size()) throw ModelError("fit_forest: row index out of range");
      p.source.push_back(static_cast<std::uint32_t>(r));
    }
  }
  p.m = p.source.size();
  if (p.m == 0) throw ModelError("fit_forest: empty training set");

  p.features.resize(features.size());
  std::vector<double> buf(p.m);
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& in = features[f];
    if (in.values.size() != target.size()) throw ModelError("fit_forest: feature and target lengths differ");
    auto& out = p.features[f];
    out.categorical = in.categorical;
    out.code.resize(p.m);
    if (in.categorical) {
      out.n_codes = in.n_levels;
      for (std::size_t i = 0; i < p.m; ++i) {
        double v = in.values[p.source[i]];
        if (v < 0 || v >= static_cast<double>(in.n_levels)) throw ModelError("fit_forest: level code out of range");
        out.code[i] = static_cast<std::uint32_t>(v);
      }
    } else {
      for (std::size_t i = 0; i < p.m; ++i) buf[i] = in.values[p.source[i]];
      out.distinct = buf;
      std::sort(out.distinct.begin(), out.distinct.end());
      out.distinct.erase(std::unique(out.distinct.begin(), out.distinct.end()), out.distinct.end());
      out.n_codes = out.distinct.size();
      for (std::size_t i = 0; i < p.m; ++i)
        out.code[i] = static_cast<std::uint32_t>(
            std::lower_bound(out.distinct.begin(), out.distinct.end(), buf[i]) - out.distinct.begin());
    }
  }

  p.categorical_target = kind == TargetKind::categorical;
  if (p.categorical_target) {
    std::vector<double> classes;
    classes.reserve(p.m);
    for (auto s : p.source) classes.push_back(target[s]);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    p.n_classes = classes.size();
    p.cls.resize(p.m);
    for (std::size_t i = 0; i < p.m; ++i)
      p.cls[i] = static_cast<std::uint32_t>(
          std::lower_bound(classes.begin(), classes.end(), target[p.source[i]]) - classes.begin());
  } else {
    p.y.resize(p.m);
    for (std::size_t i = 0; i < p.m; ++i) p.y[i] = target[p.source[i]];
  }
  return p;
}

struct Split {
  int feature = -1;
  double gain = 0.0;
  double threshold = 0.0;
  std::vector<unsigned char> left_levels;
};

class TreeBuilder {
 public:
  TreeBuilder(const Prepared& data, const ForestParams& params, Rng& rng)
      : d_(data), params_(params), rng_(rng), min_leaf_(std::max<std::size_t>(1, params.min_leaf)) {
    const std::size_t p = d_.features.size();
    mtry_ = params.features_per_split ? params.features_per_split
                                      : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    mtry_ = std::min(mtry_, p);
    feature_order_.resize(p);
    std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
    if (d_.categorical_target) {
      left_counts_.resize(d_.n_classes);
      right_counts_.resize(d_.n_classes);
    }
  }

  Tree build() {
    // Bootstrap: m draws with replacement from the local rows.
    idx_.resize(d_.m);
    for (auto& i : idx_) i = static_cast<std::uint32_t>(rng_.uniform_index(d_.m));

    Tree tree;
    tree.nodes.emplace_back();
    struct Pending {
      int node;
      std::size_t begin, end, depth;
    };
    std::vector<Pending> stack{{0, 0, idx_.size(), 0}};
    while (!stack.empty()) {
      auto [node, begin, end, depth] = stack.back();
      stack.pop_back();
      Split split;
      const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
      if (depth_ok && end - begin >= 2 * min_leaf_ && !pure(begin, end)) split = best_split(begin, end);
      if (split.feature < 0) {
        auto& leaf = tree.nodes[static_cast<std::size_t>(node)];
        leaf.donor_rows.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) leaf.donor_rows.push_back(d_.source[idx_[i]]);
        continue;
      }
      const auto& feat = d_.features[static_cast<std::size_t>(split.feature)];
      auto goes_left = [&](std::uint32_t local) {
        const auto c = feat.code[local];
        return feat.categorical ? split.left_levels[c] != 0 : feat.distinct[c] <= split.threshold;
      };
      auto mid = static_cast<std::size_t>(
          std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(begin),
                         idx_.begin() + static_cast<std::ptrdiff_t>(end), goes_left) -
          idx_.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& n = tree.nodes[static_cast<std::size_t>(node)];
      n.feature = split.feature;
      n.threshold = split.threshold;
      n.left_levels = std::move(split.left_levels);
      n.left = left;
      n.right = left + 1;
      stack.push_back({left + 1, mid, end, depth + 1});
      stack.push_back({left, begin, mid, depth + 1});
    }
    return tree;
  }

 private:
  const Prepared& d_;
  const ForestParams& params_;
  Rng& rng_;
  std::size_t min_leaf_;
  std::size_t mtry_ = 0;
  std::vector<std::size_t> feature_order_;
  std::vector<std::uint32_t> idx_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_, sorted_;  // (code, local)
  std::vector<std::uint32_t> bucket_;
  std::vector<double> left_counts_, right_counts_;
  std::vector<double> level_n_, level_sum_, level_cls_;

  bool pure(std::size_t begin, std::size_t end) const {
    if (d_.categorical_target) {
      const auto c0 = d_.cls[idx_[begin]];
      for (std::size_t i = begin + 1; i < end; ++i)
        if (d_.cls[idx_[i]] != c0) return false;
      return true;
    }
    const double y0 = d_.y[idx_[begin]];
    for (std::size_t i = begin + 1; i < end; ++i)
      if (d_.y[idx_[i]] != y0) return false;
    return true;
  }

  // Parent score: sum^2/n (numeric) or sum_c n_c^2/n (categorical). A split
  // improves impurity by (score_left + score_right) - parent_score.
  Split best_split(std::size_t begin, std::size_t end) {
    const double n = static_cast<double>(end - begin);
    double parent = 0.0, scale = 0.0;
    if (d_.categorical_target) {
      std::fill(right_counts_.begin(), right_counts_.end(), 0.0);
      for (std::size_t i = begin; i < end; ++i) right_counts_[d_.cls[idx_[i]]] += 1.0;
      for (double c : right_counts_) parent += c * c;
      parent /= n;
      scale = n;
    } else {
      double s = 0.0, ss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        s += d_.y[idx_[i]];
        ss += d_.y[idx_[i]] * d_.y[idx_[i]];
      }
      parent = s * s / n;
      scale = ss;
    }
    const double tol = 1e-12 * (std::fabs(scale) + 1.0);

    // Partial Fisher-Yates picks mtry distinct features.
    const std::size_t p = feature_order_.size();
    for (std::size_t k = 0; k < mtry_; ++k)
      std::swap(feature_order_[k], feature_order_[k + rng_.uniform_index(p - k)]);

    Split best;
    best.gain = tol;
    for (std::size_t k = 0; k < mtry_; ++k) {
      const std::size_t f = feature_order_[k];
      if (d_.features[f].categorical)
        scan_categorical(f, begin, end, parent, best);
      else
        scan_numeric(f, begin, end, parent, best);
    }
    return best;
  }

  void sort_by_code(const Prepared::Feature& feat, std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    pairs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) pairs_[i] = {feat.code[idx_[begin + i]], idx_[begin + i]};
    if (n * 8 < feat.n_codes) {
      std::sort(pairs_.begin(), pairs_.end());
      sorted_.swap(pairs_);
      return;
    }
    // Counting sort, O(n + K).
    bucket_.assign(feat.n_codes + 1, 0);
    for (const auto& pr : pairs_) ++bucket_[pr.first + 1];
    for (std::size_t c = 1; c <= feat.n_codes; ++c) bucket_[c] += bucket_[c - 1];
    sorted_.resize(n);
    for (const auto& pr : pairs_) sorted_[bucket_[pr.first]++] = pr;
  }

  void scan_numeric(std::size_t f, std::size_t begin, std::size_t end, double parent, Split& best) {
    const auto& feat = d_.features[f];
    if (feat.n_codes < 2) return;
    sort_by_code(feat, begin, end);
    const std::size_t n = end - begin;
    if (sorted_.front().first == sorted_.back().first) return;

    auto consider = [&](std::size_t i, double score) {
      if (score - parent > best.gain) {
        best.gain = score - parent;
        best.feature = static_cast<int>(f);
        const double lo = feat.distinct[sorted_[i].first];
        const double hi = feat.distinct[sorted_[i + 1].first];
        const double midpoint = lo + (hi - lo) / 2.0;
        best.threshold = midpoint >= hi ? lo : midpoint;
        best.left_levels.clear();
      }
    };

    if (d_.categorical_target) {
      std::fill(left_counts_.begin(), left_counts_.end(), 0.0);
      std::fill(right_counts_.begin(), right_counts_.end(), 0.0);
      for (const auto& pr : sorted_) right_counts_[d_.cls[pr.second]] += 1.0;
      double sq_left = 0.0, sq_right = 0.0;
      for (double c : right_counts_) sq_right += c * c;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = d_.cls[sorted_[i].second];
        sq_left += 2.0 * left_counts_[c] + 1.0;
        left_counts_[c] += 1.0;
        sq_right -= 2.0 * right_counts_[c] - 1.0;
        right_counts_[c] -= 1.0;
        if (sorted_[i].first == sorted_[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf_ || n - n_left < min_leaf_) continue;
        consider(i, sq_left / static_cast<double>(n_left) + sq_right / static_cast<double>(n - n_left));
      }
    } else {
      double total = 0.0;
      for (const auto& pr : sorted_) total += d_.y[pr.second];
      double sum_left = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        sum_left += d_.y[sorted_[i].second];
        if (sorted_[i].first == sorted_[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf_ || n - n_left < min_leaf_) continue;
        const double sum_right = total - sum_left;
        consider(i, sum_left * sum_left / static_cast<double>(n_left) +
                        sum_right * sum_right / static_cast<double>(n - n_left));
      }
    }
  }

  void scan_categorical(std::size_t f, std::size_t begin, std::size_t end, double parent, Split& best) {
    const auto& feat = d_.features[f];
    const std::size_t K = feat.n_codes;
    const double n = static_cast<double>(end - begin);
    level_n_.assign(K, 0.0);
    if (d_.categorical_target) {
      const std::size_t C = d_.n_classes;
      level_cls_.assign(K * C, 0.0);
      std::fill(right_counts_.begin(), right_counts_.end(), 0.0);  // holds totals here
      for (std::size_t i = begin; i < end; ++i) {
        const auto code = feat.code[idx_[i]];
        const auto c = d_.cls[idx_[i]];
        level_n_[code] += 1.0;
        level_cls_[code * C + c] += 1.0;
        right_counts_[c] += 1.0;
      }
      std::size_t present = 0;
      for (double v : level_n_) present += v > 0 ? 1 : 0;
      if (present < 2) return;
      // One level against the rest.
      for (std::size_t k = 0; k < K; ++k) {
        const double n_left = level_n_[k];
        if (n_left == 0 || n_left < static_cast<double>(min_leaf_) || n - n_left < static_cast<double>(min_leaf_))
          continue;
        double sq_left = 0.0, sq_right = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double l = level_cls_[k * C + c];
          const double r = right_counts_[c] - l;
          sq_left += l * l;
          sq_right += r * r;
        }
        const double gain = sq_left / n_left + sq_right / (n - n_left) - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.left_levels.assign(K, 0);
          best.left_levels[k] = 1;
          // Levels unseen at this node follow the larger child.
          if (n_left >= n - n_left)
            for (std::size_t j = 0; j < K; ++j)
              if (level_n_[j] == 0) best.left_levels[j] = 1;
        }
      }
      return;
    }

    level_sum_.assign(K, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const auto code = feat.code[idx_[i]];
      level_n_[code] += 1.0;
      level_sum_[code] += d_.y[idx_[i]];
    }
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < K; ++k)
      if (level_n_[k] > 0) order.push_back(k);
    if (order.size() < 2) return;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return level_sum_[a] / level_n_[a] < level_sum_[b] / level_n_[b];
    });
    double total = 0.0;
    for (auto k : order) total += level_sum_[k];
    double n_left = 0.0, sum_left = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      n_left += level_n_[order[i]];
      sum_left += level_sum_[order[i]];
      if (n_left < static_cast<double>(min_leaf_) || n - n_left < static_cast<double>(min_leaf_)) continue;
      const double sum_right = total - sum_left;
      const double gain = sum_left * sum_left / n_left + sum_right * sum_right / (n - n_left) - parent;
      if (gain > best.gain) {
        best.gain = gain;
        best.feature = static_cast<int>(f);
        best.left_levels.assign(K, 0);
        for (std::size_t j = 0; j <= i; ++j) best.left_levels[order[j]] = 1;
        if (n_left >= n - n_left)
          for (std::size_t j = 0; j < K; ++j)
            if (level_n_[j] == 0) best.left_levels[j] = 1;
      }
    }
  }
};

}  // namespace

template <class Get>
const TreeNode& Forest::route(std::size_t tree, Get&& value_of) const {
  const auto& nodes = trees_.at(tree).nodes;
  const TreeNode* node = &nodes[0];
  while (!node->is_leaf()) {
    const auto f = static_cast<std::size_t>(node->feature);
    const double v = value_of(f);
    bool left;
    if (feature_kinds_[f]) {
      const auto code = static_cast<std::size_t>(v);
      left = code < node->left_levels.size() && node->left_levels[code] != 0;
    } else {
      left = v <= node->threshold;
    }
    node = &nodes[static_cast<std::size_t>(left ? node->left : node->right)];
  }
  return *node;
}

const TreeNode& Forest::leaf(std::size_t tree, std::span<const double> row) const {
  if (row.size() != feature_kinds_.size()) throw ModelError("forest: row has wrong number of predictors");
  return route(tree, [&](std::size_t f) { return row[f]; });
}

const TreeNode& Forest::leaf(std::size_t tree, std::span<const FeatureColumn> features, std::size_t row) const {
  if (features.size() != feature_kinds_.size()) throw ModelError("forest: wrong number of predictors");
  return route(tree, [&](std::size_t f) { return features[f].values[row]; });
}

Forest fit_forest(std::span<const FeatureColumn> features, std::span<const double> target, TargetKind kind,
                  std::span<const std::size_t> rows, const ForestParams& params, std::uint64_t seed) {
  if (params.n_trees == 0) throw ConfigError("fit_forest: n_trees must be positive");
  const Prepared data = prepare(features, target, kind, rows);
  Forest forest;
  forest.params_ = params;
  forest.kind_ = kind;
  for (const auto& f : features) forest.feature_kinds_.push_back(f.categorical);
  forest.target_.assign(target.begin(), target.end());
  forest.trees_.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, "tree", t));
    TreeBuilder builder(data, params, rng);
    forest.trees_.push_back(builder.build());
  }
  return forest;
}

namespace {

std::uint32_t pick(const TreeNode& leaf, Rng& rng) {
  return leaf.donor_rows[rng.uniform_index(leaf.donor_rows.size())];
}

}  // namespace

std::uint32_t draw_donor_row(const Forest& forest, std::span<const double> row, Rng& rng) {
  const auto tree = rng.uniform_index(forest.trees().size());
  return pick(forest.leaf(tree, row), rng);
}

std::uint32_t draw_donor_row(const Forest& forest, std::span<const FeatureColumn> features, std::size_t row,
                             Rng& rng) {
  const auto tree = rng.uniform_index(forest.trees().size());
  return pick(forest.leaf(tree, features, row), rng);
}

double draw_donor(const Forest& forest, std::span<const double> row, Rng& rng) {
  return forest.target_of(draw_donor_row(forest, row, rng));
}

}  // namespace actugen

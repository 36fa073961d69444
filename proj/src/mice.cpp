#include "actugen/mice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "actugen/error.hpp"
#include "actugen/rng.hpp"

namespace actugen {

std::size_t MissingMask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

std::size_t MissingMask::count_in_column(std::size_t col) const {
  auto first = cells_.begin() + static_cast<std::ptrdiff_t>(col * n_rows_);
  return static_cast<std::size_t>(std::count(first, first + static_cast<std::ptrdiff_t>(n_rows_), 1));
}

std::vector<std::size_t> MissingMask::masked_rows(std::size_t col) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows_; ++i)
    if ((*this)(i, col)) out.push_back(i);
  return out;
}

std::vector<std::size_t> MissingMask::observed_rows(std::size_t col) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows_; ++i)
    if (!(*this)(i, col)) out.push_back(i);
  return out;
}

void MissingMask::validate(const Dataset& ds) const {
  if (n_rows_ != ds.n_rows() || n_cols_ != ds.n_cols())
    throw DataError("mask is " + std::to_string(n_rows_) + "x" + std::to_string(n_cols_) + ", dataset is " +
                    std::to_string(ds.n_rows()) + "x" + std::to_string(ds.n_cols()));
  for (std::size_t j = 0; j < n_cols_; ++j) {
    const auto masked = count_in_column(j);
    if (masked > 0 && masked == n_rows_)
      throw DataError("column '" + ds.schema()[j].name + "' is fully masked; nothing to impute from");
  }
}

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "mice" || name == "mice_method") return GeneratorKind::mice_method;
  if (name == "mice_all_syn") return GeneratorKind::mice_all_syn;
  if (name == "mice_tabulator") return GeneratorKind::mice_tabulator;
  throw ConfigError("unknown generation method '" + std::string(name) +
                    "' (expected mice, mice_all_syn or mice_tabulator)");
}

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::mice_method: return "mice";
    case GeneratorKind::mice_all_syn: return "mice_all_syn";
    case GeneratorKind::mice_tabulator: return "mice_tabulator";
  }
  return "mice";
}

AmputationPlan AmputationPlan::defaults(GeneratorKind strategy) {
  AmputationPlan plan;
  plan.strategy = strategy;
  if (strategy == GeneratorKind::mice_tabulator) {
    plan.cell_fraction = 0.2;
    plan.rounds = 5;
  }
  return plan;
}

void AmputationPlan::validate() const {
  if (!(cell_fraction > 0.0 && cell_fraction <= 1.0)) throw ConfigError("amputation fraction must lie in (0, 1]");
  if (rounds == 0) throw ConfigError("amputation rounds must be positive");
}

// ---------------------------------------------------------------------------

Dataset initial_impute(const Dataset& ds, const MissingMask& mask, std::uint64_t seed) {
  mask.validate(ds);
  if (mask.count() == 0) return ds;
  auto cols = ds.columns();
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    const auto masked = mask.masked_rows(j);
    if (masked.empty()) continue;
    const auto observed = mask.observed_rows(j);
    Rng rng(derive_seed(seed, "initial", j));
    for (auto i : masked) cols[j][i] = cols[j][observed[rng.uniform_index(observed.size())]];
  }
  return Dataset(ds.schema(), std::move(cols));
}

namespace {

std::vector<std::size_t> visit_order(const Schema& schema, const MiceParams& params) {
  std::vector<std::size_t> order;
  if (params.visit_order.empty()) {
    order.resize(schema.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    for (const auto& name : params.visit_order) order.push_back(schema.index_of(name));
  }
  return order;
}

TargetKind target_kind(const ColumnSpec& spec, const MiceParams& params) {
  if (spec.is_categorical()) return TargetKind::categorical;
  if (spec.role == ColumnRole::response && params.response_as_categorical) return TargetKind::categorical;
  return TargetKind::numeric;
}

}  // namespace

Dataset mice_cycle(const Dataset& ds, const MissingMask& mask, const MiceParams& params, std::uint64_t seed) {
  mask.validate(ds);
  const auto& schema = ds.schema();
  auto cols = ds.columns();
  const std::size_t p = ds.n_cols();
  for (auto j : visit_order(schema, params)) {
    const auto masked = mask.masked_rows(j);
    if (masked.empty()) continue;
    const auto observed = mask.observed_rows(j);

    // Predictors view the current values, so columns updated earlier in this
    // cycle already carry their new imputations.
    std::vector<FeatureColumn> features;
    features.reserve(p - 1);
    for (std::size_t k = 0; k < p; ++k) {
      if (k == j) continue;
      features.push_back(FeatureColumn{cols[k], schema[k].is_categorical(), schema[k].levels.size()});
    }
    const Forest forest = fit_forest(features, cols[j], target_kind(schema[j], params), observed, params.forest,
                                     derive_seed(seed, "forest", j));
    Rng rng(derive_seed(seed, "donor", j));
    std::vector<double> imputed(masked.size());
    for (std::size_t r = 0; r < masked.size(); ++r)
      imputed[r] = forest.target_of(draw_donor_row(forest, features, masked[r], rng));
    for (std::size_t r = 0; r < masked.size(); ++r) cols[j][masked[r]] = imputed[r];
  }
  return Dataset(schema, std::move(cols));
}

Dataset run_mice(const Dataset& ds, const MissingMask& mask, const MiceParams& params, std::uint64_t seed) {
  if (params.iterations == 0) throw ConfigError("MICE needs at least one iteration");
  mask.validate(ds);
  if (mask.count() == 0) return ds;
  Dataset current = initial_impute(ds, mask, derive_seed(seed, "initial"));
  for (std::size_t t = 0; t < params.iterations; ++t)
    current = mice_cycle(current, mask, params, derive_seed(seed, "cycle", t));
  return current;
}

std::vector<Dataset> run_mice_sets(const Dataset& ds, const MissingMask& mask, const MiceParams& params,
                                   std::uint64_t seed) {
  if (params.imputed_sets == 0) throw ConfigError("MICE needs at least one imputed set");
  std::vector<Dataset> out;
  out.reserve(params.imputed_sets);
  for (std::size_t s = 0; s < params.imputed_sets; ++s)
    out.push_back(run_mice(ds, mask, params, derive_seed(seed, "set", s)));
  return out;
}

namespace {

std::size_t cells_for(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

// `count` distinct cell indices out of [0, total), uniformly.
std::vector<std::size_t> sample_cells(std::size_t total, std::size_t count, Rng& rng) {
  std::vector<std::size_t> cells(total);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(cells[i], cells[i + rng.uniform_index(total - i)]);
  cells.resize(count);
  return cells;
}

// Mask over train stacked above copy, with `copy_mask` placed on the copy rows.
MissingMask stack_mask(const MissingMask& copy_mask) {
  const std::size_t n = copy_mask.n_rows();
  MissingMask stacked(2 * n, copy_mask.n_cols());
  for (std::size_t j = 0; j < copy_mask.n_cols(); ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (copy_mask(i, j)) stacked.set(n + i, j);
  return stacked;
}

Dataset impute_stacked(const Dataset& train, const Dataset& copy, const MissingMask& copy_mask,
                       const MiceParams& params, std::uint64_t seed) {
  const Dataset stacked = concat_rows(train, copy);
  const Dataset completed = run_mice(stacked, stack_mask(copy_mask), params, seed);
  std::vector<std::size_t> rows(copy.n_rows());
  std::iota(rows.begin(), rows.end(), train.n_rows());
  return completed.select_rows(rows);
}

void merge_into(MissingMask& acc, const MissingMask& m) {
  for (std::size_t c = 0; c < m.n_rows() * m.n_cols(); ++c)
    if (m.cell(c)) acc.set_cell(c);
}

}  // namespace

MissingMask ampute_random_cells(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("ampute_random_cells: fraction must lie in (0, 1)");
  const std::size_t total = ds.n_rows() * ds.n_cols();
  Rng rng(seed);
  MissingMask mask(ds.n_rows(), ds.n_cols());
  for (auto c : sample_cells(total, cells_for(fraction, total), rng)) mask.set_cell(c);
  mask.validate(ds);
  return mask;
}

SyntheticData gen_mice_method(const Dataset& train, const MiceParams& params, std::uint64_t seed, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("gen_mice_method: fraction must lie in (0, 1]");
  const std::size_t total = train.n_rows() * train.n_cols();
  Rng rng(derive_seed(seed, "amputate"));
  MissingMask mask(train.n_rows(), train.n_cols());
  for (auto c : sample_cells(total, cells_for(fraction, total), rng)) mask.set_cell(c);
  SyntheticData out{impute_stacked(train, train, mask, params, derive_seed(seed, "impute")), mask, {mask}};
  return out;
}

SyntheticData gen_mice_all_syn(const Dataset& train, const MiceParams& params, std::uint64_t seed,
                               double fraction) {
  SyntheticData first = gen_mice_method(train, params, derive_seed(seed, "first"), fraction);
  MissingMask rest(train.n_rows(), train.n_cols());
  for (std::size_t c = 0; c < train.n_rows() * train.n_cols(); ++c)
    if (!first.regenerated.cell(c)) rest.set_cell(c);
  Dataset data = rest.count() == 0
                     ? first.data
                     : impute_stacked(train, first.data, rest, params, derive_seed(seed, "second"));
  MissingMask all = first.regenerated;
  merge_into(all, rest);
  return SyntheticData{std::move(data), std::move(all), {first.regenerated, rest}};
}

SyntheticData gen_mice_tabulator(const Dataset& train, const MiceParams& params, std::uint64_t seed,
                                 std::size_t rounds, double fraction, bool disjoint) {
  if (rounds == 0) throw ConfigError("gen_mice_tabulator: rounds must be positive");
  const std::size_t total = train.n_rows() * train.n_cols();
  std::vector<std::size_t> order;
  if (disjoint) {
    Rng rng(derive_seed(seed, "partition"));
    order = sample_cells(total, total, rng);
  } else if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("gen_mice_tabulator: fraction must lie in (0, 1]");
  }
  Dataset working = train;
  MissingMask all(train.n_rows(), train.n_cols());
  std::vector<MissingMask> passes;
  for (std::size_t r = 0; r < rounds; ++r) {
    MissingMask mask(train.n_rows(), train.n_cols());
    if (disjoint) {
      const std::size_t lo = r * total / rounds;
      const std::size_t hi = (r + 1) * total / rounds;
      for (std::size_t k = lo; k < hi; ++k) mask.set_cell(order[k]);
    } else {
      Rng rng(derive_seed(seed, "round-cells", r));
      for (auto c : sample_cells(total, cells_for(fraction, total), rng)) mask.set_cell(c);
    }
    if (mask.count() > 0) working = impute_stacked(train, working, mask, params, derive_seed(seed, "round", r));
    merge_into(all, mask);
    passes.push_back(std::move(mask));
  }
  return SyntheticData{std::move(working), std::move(all), std::move(passes)};
}

SyntheticData generate_synthetic(const Dataset& train, const AmputationPlan& plan, const MiceParams& params,
                                 std::uint64_t seed) {
  plan.validate();
  switch (plan.strategy) {
    case GeneratorKind::mice_method: return gen_mice_method(train, params, seed, plan.cell_fraction);
    case GeneratorKind::mice_all_syn: return gen_mice_all_syn(train, params, seed, plan.cell_fraction);
    case GeneratorKind::mice_tabulator:
      return gen_mice_tabulator(train, params, seed, plan.rounds, plan.cell_fraction, plan.disjoint_rounds);
  }
  throw ConfigError("unknown generation strategy");
}

ConstraintReport constraint_report(const Dataset& ds) {
  ConstraintReport r;
  const auto& s = ds.schema();
  auto count_if = [&](std::string_view name, auto pred) -> std::size_t {
    auto j = s.find(name);
    if (!j || s[*j].is_categorical()) return 0;
    auto col = ds.column(*j);
    return static_cast<std::size_t>(std::count_if(col.begin(), col.end(), pred));
  };
  r.driver_under_18 = count_if("DRIVER_AGE", [](double v) { return v < 18.0; });
  r.negative_vehicle_age = count_if("VEHICLE_AGE", [](double v) { return v < 0.0; });
  r.bonus_malus_below_50 = count_if("BONUS_MALUS", [](double v) { return v < 50.0; });
  r.density_below_1 = count_if("DENSITY", [](double v) { return v < 1.0; });
  return r;
}

}  // namespace actugen

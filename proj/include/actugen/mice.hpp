#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "actugen/forest.hpp"
#include "actugen/tabular.hpp"

namespace actugen {

// Per-cell "to impute" flags aligned with a dataset.
class MissingMask {
 public:
  MissingMask() = default;
  MissingMask(std::size_t n_rows, std::size_t n_cols)
      : n_rows_(n_rows), n_cols_(n_cols), cells_(n_rows * n_cols, 0) {}

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  bool operator()(std::size_t row, std::size_t col) const { return cells_[col * n_rows_ + row] != 0; }
  void set(std::size_t row, std::size_t col, bool masked = true) {
    cells_[col * n_rows_ + row] = masked ? 1 : 0;
  }
  // Cell index in column-major order: col * n_rows + row.
  void set_cell(std::size_t cell, bool masked = true) { cells_[cell] = masked ? 1 : 0; }
  bool cell(std::size_t cell) const { return cells_[cell] != 0; }

  std::size_t count() const;
  std::size_t count_in_column(std::size_t col) const;
  std::vector<std::size_t> masked_rows(std::size_t col) const;
  std::vector<std::size_t> observed_rows(std::size_t col) const;

  // Throws DataError if dimensions differ from ds or a column with masked
  // cells has no observed cell left.
  void validate(const Dataset& ds) const;

  bool operator==(const MissingMask&) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<unsigned char> cells_;
};

struct MiceParams {
  std::size_t iterations = 5;      // chained-equation cycles per run
  std::size_t imputed_sets = 1;    // independent completed datasets
  ForestParams forest;
  std::vector<std::string> visit_order;  // empty = schema order
  // Impute the response as a class over its observed support instead of a
  // numeric target. Donor draws keep counts integral either way.
  bool response_as_categorical = true;
};

enum class GeneratorKind { mice_method, mice_all_syn, mice_tabulator };
GeneratorKind parse_generator_kind(std::string_view name);  // throws ConfigError
std::string_view to_string(GeneratorKind kind);

struct AmputationPlan {
  GeneratorKind strategy = GeneratorKind::mice_method;
  double cell_fraction = 0.75;  // per pass (method, all_syn) or per round (tabulator)
  std::size_t rounds = 1;       // tabulator rounds
  bool disjoint_rounds = true;  // tabulator: rounds partition the cell grid

  static AmputationPlan defaults(GeneratorKind strategy);
  void validate() const;
};

// Step 1: every masked cell gets a uniform draw from its column's observed cells.
Dataset initial_impute(const Dataset& ds, const MissingMask& mask, std::uint64_t seed);

// Steps 2-5: one pass over the columns in visit order. For each column with
// masked cells a forest is fitted on the rows where it is observed, using all
// other columns at their current values, and every masked cell is replaced
// by a donor draw.
Dataset mice_cycle(const Dataset& ds, const MissingMask& mask, const MiceParams& params, std::uint64_t seed);

// Step 1 then `iterations` cycles.
Dataset run_mice(const Dataset& ds, const MissingMask& mask, const MiceParams& params, std::uint64_t seed);

// Step 7: `imputed_sets` independent runs.
std::vector<Dataset> run_mice_sets(const Dataset& ds, const MissingMask& mask, const MiceParams& params,
                                   std::uint64_t seed);

// Exactly floor(fraction * n * p) cells, uniformly without replacement.
MissingMask ampute_random_cells(const Dataset& ds, double fraction, std::uint64_t seed);

struct SyntheticData {
  Dataset data;                    // same schema and row count as the training data
  MissingMask regenerated;         // union of amputated cells of the copy
  std::vector<MissingMask> passes; // mask of each amputation-imputation pass
};

// A copy of train with `fraction` of its cells amputated is stacked under
// train and completed by run_mice; the completed copy is returned.
SyntheticData gen_mice_method(const Dataset& train, const MiceParams& params, std::uint64_t seed,
                              double fraction = 0.75);

// gen_mice_method, then a second pass amputating exactly the cells the first
// pass left untouched. The result is fully synthetic.
SyntheticData gen_mice_all_syn(const Dataset& train, const MiceParams& params, std::uint64_t seed,
                               double fraction = 0.75);

// `rounds` sequential amputation-imputation passes on a working copy stacked
// under train. With disjoint rounds the passes partition the cell grid into
// near-equal chunks; otherwise each pass draws floor(fraction * n * p) fresh
// cells independently.
SyntheticData gen_mice_tabulator(const Dataset& train, const MiceParams& params, std::uint64_t seed,
                                 std::size_t rounds = 5, double fraction = 0.2, bool disjoint = true);

SyntheticData generate_synthetic(const Dataset& train, const AmputationPlan& plan, const MiceParams& params,
                                 std::uint64_t seed);

// Rows breaking simple portfolio constraints. Generators do not enforce
// them; this only reports.
struct ConstraintReport {
  std::size_t driver_under_18 = 0;
  std::size_t negative_vehicle_age = 0;
  std::size_t bonus_malus_below_50 = 0;
  std::size_t density_below_1 = 0;
  std::size_t total() const {
    return driver_under_18 + negative_vehicle_age + bonus_malus_below_50 + density_below_1;
  }
};
ConstraintReport constraint_report(const Dataset& ds);

}  // namespace actugen

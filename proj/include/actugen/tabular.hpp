#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace actugen {

enum class ColumnKind { categorical, numeric };
enum class ColumnRole { covariate, exposure, response };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> levels;  // categorical only, in declared order
  ColumnRole role = ColumnRole::covariate;
  std::string source;               // CSV header; empty means `name`

  const std::string& header() const { return source.empty() ? name : source; }
  bool is_categorical() const { return kind == ColumnKind::categorical; }
};

// Ordered column specifications. Checks that names are unique, categorical
// level lists are non-empty and duplicate free, and that there is at most one
// response and at most one exposure column.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);

  std::size_t size() const { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t j) const { return columns_[j]; }
  const std::vector<ColumnSpec>& columns() const { return columns_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws DataError
  std::optional<std::size_t> response() const { return response_; }
  std::optional<std::size_t> exposure() const { return exposure_; }

  // Level code of `label` in column j; nullopt if undeclared.
  std::optional<std::size_t> level_code(std::size_t j, std::string_view label) const;

  bool operator==(const Schema& other) const;

 private:
  std::vector<ColumnSpec> columns_;
  std::optional<std::size_t> response_;
  std::optional<std::size_t> exposure_;
};

// Column-oriented table. Every cell is stored as a double: categorical cells
// hold the level code. Construction validates the cell invariants (declared
// codes, finite numerics, non-negative integer responses); after that the
// dataset is immutable.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, std::vector<std::vector<double>> columns);

  const Schema& schema() const { return schema_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }

  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  std::span<const double> column(std::string_view name) const {
    return columns_[schema_.index_of(name)];
  }
  const std::vector<std::vector<double>>& columns() const { return columns_; }
  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  const std::string& label(std::size_t row, std::size_t col) const;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  Dataset with_column(std::size_t j, std::vector<double> values) const;

  bool operator==(const Dataset& other) const;

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::size_t n_rows_ = 0;
};

// Row-wise concatenation; schemas must be equal.
Dataset concat_rows(const Dataset& top, const Dataset& bottom);

struct CsvOptions {
  char delimiter = ',';
};

// Reads a header-first CSV. Columns are matched by ColumnSpec::header();
// extra CSV columns are ignored. Surrounding single or double quotes on
// labels are stripped. Errors name the 1-based data row and the column.
Dataset load_portfolio(const std::string& path, const Schema& schema, CsvOptions options = {});
Dataset parse_csv(std::string_view text, const Schema& schema, CsvOptions options = {},
                  std::string_view origin = "<memory>");

// Writes headers and labels verbatim and numerics in shortest round-trip form.
void write_csv(const Dataset& ds, const std::string& path, CsvOptions options = {});
std::string to_csv(const Dataset& ds, CsvOptions options = {});

// The French MTPL frequency portfolio: five categorical and four numeric
// covariates, Exposure and ClaimNb. VEHICLE_POWER is categorical 4..15.
Schema fremtpl2_schema();

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // ascending source row indices
  std::vector<std::size_t> test_rows;
};

// |train| = floor(n * train_fraction); rows keep their source order.
TrainTestSplit split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed);

// Uniform subsample of `n` rows without replacement, source order kept.
Dataset subsample_rows(const Dataset& ds, std::size_t n, std::uint64_t seed);

// Copy with the exposure column (if any) set to 1.
Dataset with_unit_exposure(const Dataset& ds);

// n x m_j indicator block; column k is 1 where the cell holds level k.
Eigen::MatrixXd one_hot(const Dataset& ds, std::size_t col);

// n x (m_j - 1) block without the reference level's column.
Eigen::MatrixXd dummy_encode(const Dataset& ds, std::size_t col, std::string_view reference);

// Most frequent level; ties go to the alphabetically smallest label.
std::string default_reference_level(const Dataset& ds, std::size_t col);

// Cut points for one numeric column. Value x falls in bin
// #{cuts c : c < x}, i.e. bins are (c_{k-1}, c_k].
struct NumericBins {
  std::vector<double> cuts;

  std::size_t n_bins() const { return cuts.size() + 1; }
  std::size_t bin_of(double x) const;
};

// Nearest-rank quantiles at q/n_bins, q = 1..n_bins-1. Each cut sits halfway
// between a quantile value and the next larger distinct value. A value that
// is the quantile for two or more q also gets a cut below it, so it occupies
// a bin of its own.
NumericBins quantile_bins(std::span<const double> values, std::size_t n_bins);

// Discretisation of the metric variables of a training dataset: levels for
// categorical columns, quantile bins for numeric ones.
struct VariableBins {
  std::string name;
  std::size_t column = 0;
  ColumnKind kind = ColumnKind::numeric;
  NumericBins bins;  // numeric only
  std::size_t n_features = 0;

  std::size_t feature_of(double cell) const;
};

struct BinMap {
  std::vector<VariableBins> variables;

  // Builds bins for `columns` of `train` (all covariates if empty).
  static BinMap build(const Dataset& train, std::vector<std::string> columns,
                      std::size_t n_bins = 10);
  const VariableBins& get(std::string_view name) const;
};

// Names of covariate columns in schema order.
std::vector<std::string> covariate_names(const Schema& schema);

}  // namespace actugen

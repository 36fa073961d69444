#include "actugen/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "actugen/error.hpp"
#include "actugen/rng.hpp"

namespace actugen {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::categorical ? "categorical" : "numeric";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::covariate: return "covariate";
    case ColumnRole::exposure: return "exposure";
    case ColumnRole::response: return "response";
  }
  return "covariate";
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& c = columns_[j];
    if (c.name.empty()) throw DataError("schema: column " + std::to_string(j) + " has no name");
    if (!names.insert(c.name).second) throw DataError("schema: duplicate column '" + c.name + "'");
    if (c.kind == ColumnKind::categorical) {
      if (c.levels.empty()) throw DataError("schema: categorical column '" + c.name + "' has no levels");
      std::set<std::string> seen;
      for (const auto& l : c.levels) {
        if (l.empty()) throw DataError("schema: empty level in column '" + c.name + "'");
        if (!seen.insert(l).second)
          throw DataError("schema: duplicate level '" + l + "' in column '" + c.name + "'");
      }
    } else if (!c.levels.empty()) {
      throw DataError("schema: numeric column '" + c.name + "' declares levels");
    }
    if (c.role == ColumnRole::response) {
      if (response_) throw DataError("schema: more than one response column");
      if (c.kind != ColumnKind::numeric) throw DataError("schema: response column must be numeric");
      response_ = j;
    }
    if (c.role == ColumnRole::exposure) {
      if (exposure_) throw DataError("schema: more than one exposure column");
      if (c.kind != ColumnKind::numeric) throw DataError("schema: exposure column must be numeric");
      exposure_ = j;
    }
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].name == name) return j;
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto j = find(name)) return *j;
  throw DataError("no column named '" + std::string(name) + "'");
}

std::optional<std::size_t> Schema::level_code(std::size_t j, std::string_view label) const {
  const auto& levels = columns_[j].levels;
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (levels[k] == label) return k;
  return std::nullopt;
}

bool Schema::operator==(const Schema& other) const {
  if (columns_.size() != other.columns_.size()) return false;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& a = columns_[j];
    const auto& b = other.columns_[j];
    if (a.name != b.name || a.kind != b.kind || a.levels != b.levels || a.role != b.role) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

void validate_cell(const ColumnSpec& spec, double v, std::size_t row) {
  auto fail = [&](const std::string& what) {
    throw DataError("row " + std::to_string(row + 1) + ", column '" + spec.name + "': " + what);
  };
  if (!std::isfinite(v)) fail("non-finite value");
  if (spec.kind == ColumnKind::categorical) {
    if (v < 0 || v >= static_cast<double>(spec.levels.size()) || v != std::floor(v))
      fail("invalid level code");
  } else if (spec.role == ColumnRole::response) {
    if (v < 0 || v != std::floor(v)) fail("response must be a non-negative integer");
  }
}

}  // namespace

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.size())
    throw DataError("dataset: " + std::to_string(columns_.size()) + " columns for a schema of " +
                    std::to_string(schema_.size()));
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].size() != n_rows_)
      throw DataError("dataset: column '" + schema_[j].name + "' has length " +
                      std::to_string(columns_[j].size()) + ", expected " + std::to_string(n_rows_));
    for (std::size_t i = 0; i < n_rows_; ++i) validate_cell(schema_[j], columns_[j][i], i);
  }
}

const std::string& Dataset::label(std::size_t row, std::size_t col) const {
  const auto& spec = schema_[col];
  if (!spec.is_categorical()) throw DataError("column '" + spec.name + "' is not categorical");
  return spec.levels[static_cast<std::size_t>(columns_[col][row])];
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> out(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    out[j].reserve(rows.size());
    for (auto r : rows) out[j].push_back(columns_[j].at(r));
  }
  return Dataset(schema_, std::move(out));
}

Dataset Dataset::with_column(std::size_t j, std::vector<double> values) const {
  auto cols = columns_;
  cols.at(j) = std::move(values);
  return Dataset(schema_, std::move(cols));
}

bool Dataset::operator==(const Dataset& other) const {
  return schema_ == other.schema_ && columns_ == other.columns_;
}

Dataset concat_rows(const Dataset& top, const Dataset& bottom) {
  if (!(top.schema() == bottom.schema())) throw DataError("concat_rows: schema mismatch");
  auto cols = top.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto b = bottom.column(j);
    cols[j].insert(cols[j].end(), b.begin(), b.end());
  }
  return Dataset(top.schema(), std::move(cols));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

// Splits one record starting at `pos`; handles double-quoted fields with "" escapes.
bool next_record(std::string_view text, std::size_t& pos, char delim, std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field.push_back(c);
      ++pos;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      ++pos;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      break;
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && ((s.front() == '\'' && s.back() == '\'') || (s.front() == '"' && s.back() == '"')))
    s = s.substr(1, s.size() - 2);
  return s;
}

bool blank_record(const std::vector<std::string>& fields) {
  return fields.size() == 1 && trim(fields[0]).empty();
}

}  // namespace

Dataset parse_csv(std::string_view text, const Schema& schema, CsvOptions options, std::string_view origin) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::size_t pos = 0;
  std::vector<std::string> fields;
  if (!next_record(text, pos, options.delimiter, fields) || blank_record(fields))
    throw DataError(std::string(origin) + ": empty file (no header row)");

  std::vector<std::size_t> field_of(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& want = schema[j].header();
    auto it = std::find_if(fields.begin(), fields.end(),
                           [&](const std::string& h) { return unquote(h) == want; });
    if (it == fields.end())
      throw DataError(std::string(origin) + ": missing column '" + want + "'");
    field_of[j] = static_cast<std::size_t>(it - fields.begin());
  }
  const std::size_t width = fields.size();

  std::vector<std::vector<double>> cols(schema.size());
  std::size_t row = 0;
  while (next_record(text, pos, options.delimiter, fields)) {
    if (blank_record(fields)) continue;
    ++row;
    auto fail = [&](std::size_t j, const std::string& what) {
      throw DataError(std::string(origin) + ": row " + std::to_string(row) + ", column '" +
                      schema[j].header() + "': " + what);
    };
    if (fields.size() != width)
      throw DataError(std::string(origin) + ": row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, header has " + std::to_string(width));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      std::string_view cell = unquote(fields[field_of[j]]);
      if (schema[j].is_categorical()) {
        auto code = schema.level_code(j, cell);
        if (!code) fail(j, "undeclared level '" + std::string(cell) + "'");
        cols[j].push_back(static_cast<double>(*code));
      } else {
        double v = 0;
        auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || end != cell.data() + cell.size() || cell.empty())
          fail(j, "unparseable number '" + std::string(cell) + "'");
        if (!std::isfinite(v)) fail(j, "non-finite value");
        if (schema[j].role == ColumnRole::response && (v < 0 || v != std::floor(v)))
          fail(j, "response must be a non-negative integer");
        cols[j].push_back(v);
      }
    }
  }
  if (row == 0) throw DataError(std::string(origin) + ": no data rows");
  return Dataset(schema, std::move(cols));
}

Dataset load_portfolio(const std::string& path, const Schema& schema, CsvOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return parse_csv(text, schema, options, path);
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

void append_field(std::string& out, const std::string& s, char delim) {
  if (s.find(delim) != std::string::npos || s.find('"') != std::string::npos ||
      s.find('\n') != std::string::npos) {
    out.push_back('"');
    for (char c : s) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
  } else {
    out += s;
  }
}

}  // namespace

std::string to_csv(const Dataset& ds, CsvOptions options) {
  const auto& schema = ds.schema();
  std::string out;
  out.reserve(ds.n_rows() * ds.n_cols() * 8 + 256);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j) out.push_back(options.delimiter);
    append_field(out, schema[j].header(), options.delimiter);
  }
  out.push_back('\n');
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out.push_back(options.delimiter);
      if (schema[j].is_categorical())
        append_field(out, ds.label(i, j), options.delimiter);
      else
        append_number(out, ds.at(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const Dataset& ds, const std::string& path, CsvOptions options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << to_csv(ds, options);
  if (!out) throw DataError(path + ": write failed");
}

// ---------------------------------------------------------------------------

Schema fremtpl2_schema() {
  auto cat = [](std::string name, std::string source, std::vector<std::string> levels) {
    return ColumnSpec{std::move(name), ColumnKind::categorical, std::move(levels), ColumnRole::covariate,
                      std::move(source)};
  };
  auto num = [](std::string name, std::string source, ColumnRole role = ColumnRole::covariate) {
    return ColumnSpec{std::move(name), ColumnKind::numeric, {}, role, std::move(source)};
  };
  std::vector<std::string> power;
  for (int p = 4; p <= 15; ++p) power.push_back(std::to_string(p));
  return Schema({
      num("ClaimNb", "ClaimNb", ColumnRole::response),
      num("Exposure", "Exposure", ColumnRole::exposure),
      cat("AREA", "Area", {"A", "B", "C", "D", "E", "F"}),
      cat("VEHICLE_POWER", "VehPower", power),
      num("VEHICLE_AGE", "VehAge"),
      num("DRIVER_AGE", "DrivAge"),
      num("BONUS_MALUS", "BonusMalus"),
      cat("VEHICLE_BRAND", "VehBrand", {"B1", "B2", "B3", "B4", "B5", "B6", "B10", "B11", "B12", "B13", "B14"}),
      cat("VEHICLE_GAS", "VehGas", {"Diesel", "Regular"}),
      num("DENSITY", "Density"),
      cat("REGION", "Region",
          {"R11", "R21", "R22", "R23", "R24", "R25", "R26", "R31", "R41", "R42", "R43",
           "R52", "R53", "R54", "R72", "R73", "R74", "R82", "R83", "R91", "R93", "R94"}),
  });
}

TrainTestSplit split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("split_train_test: train fraction must lie in (0, 1)");
  const std::size_t n = ds.n_rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  TrainTestSplit out;
  out.train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = ds.select_rows(out.train_rows);
  out.test = ds.select_rows(out.test_rows);
  return out;
}

Dataset subsample_rows(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n >= ds.n_rows()) return ds;
  std::vector<std::size_t> perm(ds.n_rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots are a uniform sample.
  for (std::size_t i = 0; i < n; ++i) std::swap(perm[i], perm[i + rng.uniform_index(perm.size() - i)]);
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  return ds.select_rows(perm);
}

Dataset with_unit_exposure(const Dataset& ds) {
  auto e = ds.schema().exposure();
  if (!e) return ds;
  return ds.with_column(*e, std::vector<double>(ds.n_rows(), 1.0));
}

Eigen::MatrixXd one_hot(const Dataset& ds, std::size_t col) {
  const auto& spec = ds.schema()[col];
  if (!spec.is_categorical()) throw DataError("one_hot: column '" + spec.name + "' is not categorical");
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.n_rows()),
                                                static_cast<Eigen::Index>(spec.levels.size()));
  auto values = ds.column(col);
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(values[i])) = 1.0;
  return block;
}

Eigen::MatrixXd dummy_encode(const Dataset& ds, std::size_t col, std::string_view reference) {
  const auto& spec = ds.schema()[col];
  if (!spec.is_categorical()) throw DataError("dummy_encode: column '" + spec.name + "' is not categorical");
  auto ref = ds.schema().level_code(col, reference);
  if (!ref)
    throw DataError("dummy_encode: unknown reference level '" + std::string(reference) + "' for column '" +
                    spec.name + "'");
  const auto m = static_cast<Eigen::Index>(spec.levels.size());
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.n_rows()), m - 1);
  auto values = ds.column(col);
  const auto r = static_cast<Eigen::Index>(*ref);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    auto k = static_cast<Eigen::Index>(values[i]);
    if (k == r) continue;
    block(static_cast<Eigen::Index>(i), k < r ? k : k - 1) = 1.0;
  }
  return block;
}

std::string default_reference_level(const Dataset& ds, std::size_t col) {
  const auto& spec = ds.schema()[col];
  if (!spec.is_categorical()) throw DataError("column '" + spec.name + "' is not categorical");
  std::vector<std::size_t> counts(spec.levels.size(), 0);
  for (double v : ds.column(col)) ++counts[static_cast<std::size_t>(v)];
  std::size_t best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[best] || (counts[k] == counts[best] && spec.levels[k] < spec.levels[best])) best = k;
  }
  return spec.levels[best];
}

// ---------------------------------------------------------------------------
// Binning

std::size_t NumericBins::bin_of(double x) const {
  return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

NumericBins quantile_bins(std::span<const double> values, std::size_t n_bins) {
  if (n_bins == 0) throw ConfigError("quantile_bins: n_bins must be at least 1");
  if (values.empty()) throw DataError("quantile_bins: empty column");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  std::vector<double> distinct;
  for (double v : sorted)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);

  // Nearest-rank quantile values and how many q's land on each.
  std::map<double, int> hits;
  for (std::size_t q = 1; q < n_bins; ++q) {
    std::size_t rank = (q * n + n_bins - 1) / n_bins;  // ceil(q n / n_bins), 1-based
    rank = std::clamp<std::size_t>(rank, 1, n);
    ++hits[sorted[rank - 1]];
  }

  auto midpoint = [](double lo, double hi) {
    double mid = lo + (hi - lo) / 2.0;
    return mid >= hi ? lo : mid;
  };
  std::set<double> cuts;
  for (auto [value, count] : hits) {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), value);
    if (it + 1 != distinct.end()) cuts.insert(midpoint(value, *(it + 1)));
    if (count >= 2 && it != distinct.begin()) cuts.insert(midpoint(*(it - 1), value));
  }
  return NumericBins{std::vector<double>(cuts.begin(), cuts.end())};
}

std::size_t VariableBins::feature_of(double cell) const {
  return kind == ColumnKind::categorical ? static_cast<std::size_t>(cell) : bins.bin_of(cell);
}

BinMap BinMap::build(const Dataset& train, std::vector<std::string> columns, std::size_t n_bins) {
  if (columns.empty()) columns = covariate_names(train.schema());
  BinMap map;
  for (const auto& name : columns) {
    VariableBins vb;
    vb.name = name;
    vb.column = train.schema().index_of(name);
    vb.kind = train.schema()[vb.column].kind;
    if (vb.kind == ColumnKind::categorical) {
      vb.n_features = train.schema()[vb.column].levels.size();
    } else {
      vb.bins = quantile_bins(train.column(vb.column), n_bins);
      vb.n_features = vb.bins.n_bins();
    }
    map.variables.push_back(std::move(vb));
  }
  return map;
}

const VariableBins& BinMap::get(std::string_view name) const {
  for (const auto& v : variables)
    if (v.name == name) return v;
  throw DataError("bin map has no variable '" + std::string(name) + "'");
}

std::vector<std::string> covariate_names(const Schema& schema) {
  std::vector<std::string> out;
  for (const auto& c : schema.columns())
    if (c.role == ColumnRole::covariate) out.push_back(c.name);
  return out;
}

}  // namespace actugen

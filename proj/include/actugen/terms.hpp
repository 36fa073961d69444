#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "actugen/tabular.hpp"

namespace actugen {

// (x - center) * scale for a numeric column.
struct NumericFactor {
  std::string column;
  double center = 0.0;
  double scale = 1.0;
};

// 1{x in levels} for a categorical column.
struct LevelSetFactor {
  std::string column;
  std::vector<std::string> levels;
};

using Factor = std::variant<NumericFactor, LevelSetFactor>;

// A design term is the product of its factors; no factors means intercept.
// `unit` names the selectable variable the term belongs to (the column for
// main effects, the term itself for interactions).
struct Term {
  std::string name;
  std::string unit;
  std::vector<Factor> factors;

  bool is_intercept() const { return factors.empty(); }
  std::vector<std::string> columns() const;

  static Term intercept();
  static Term numeric(std::string column, double center = 0.0, double scale = 1.0);
  static Term level_set(std::string column, std::vector<std::string> levels);
  // Product term; its unit is its own name.
  static Term product(const Term& a, const Term& b);
};

// Terms resolved against a schema: column indices and per-level masks.
// Throws DataError for missing columns, kind mismatches or undeclared levels.
class BoundTerms {
 public:
  BoundTerms(std::span<const Term> terms, const Schema& schema);

  std::size_t size() const { return terms_.size(); }
  double eval(const Dataset& ds, std::size_t term, std::size_t row) const;
  // Writes term values for every row of ds into out[0..n).
  void fill(const Dataset& ds, std::size_t term, double* out) const;

 private:
  struct BoundFactor {
    std::size_t column = 0;
    bool numeric = true;
    double center = 0.0;
    double scale = 1.0;
    std::vector<unsigned char> in_set;  // per level code
  };
  std::vector<std::vector<BoundFactor>> terms_;

  static double factor_value(const BoundFactor& f, double cell);
};

}  // namespace actugen

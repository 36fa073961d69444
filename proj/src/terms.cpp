#include "actugen/terms.hpp"

#include <algorithm>

#include "actugen/error.hpp"

namespace actugen {

namespace {

std::string format_center(double c) {
  std::string s = std::to_string(c);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += xs[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> Term::columns() const {
  std::vector<std::string> out;
  for (const auto& f : factors) {
    const std::string& c = std::visit([](const auto& x) -> const std::string& { return x.column; }, f);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

Term Term::intercept() { return Term{"(Intercept)", "(Intercept)", {}}; }

Term Term::numeric(std::string column, double center, double scale) {
  std::string name = column;
  if (center != 0.0) name = "(" + column + "-" + format_center(center) + ")";
  if (scale != 1.0) name = format_center(scale) + "*" + name;
  std::string unit = column;
  return Term{std::move(name), std::move(unit), {NumericFactor{std::move(column), center, scale}}};
}

Term Term::level_set(std::string column, std::vector<std::string> levels) {
  std::string name = column + "{" + join(levels) + "}";
  std::string unit = column;
  return Term{std::move(name), std::move(unit), {LevelSetFactor{std::move(column), std::move(levels)}}};
}

Term Term::product(const Term& a, const Term& b) {
  Term t;
  t.name = a.name + ":" + b.name;
  t.unit = t.name;
  t.factors = a.factors;
  t.factors.insert(t.factors.end(), b.factors.begin(), b.factors.end());
  return t;
}

BoundTerms::BoundTerms(std::span<const Term> terms, const Schema& schema) {
  terms_.reserve(terms.size());
  for (const auto& term : terms) {
    std::vector<BoundFactor> bound;
    for (const auto& factor : term.factors) {
      BoundFactor bf;
      if (const auto* nf = std::get_if<NumericFactor>(&factor)) {
        auto j = schema.find(nf->column);
        if (!j) throw DataError("term '" + term.name + "': missing column '" + nf->column + "'");
        if (schema[*j].is_categorical())
          throw DataError("term '" + term.name + "': column '" + nf->column + "' is categorical");
        bf.column = *j;
        bf.center = nf->center;
        bf.scale = nf->scale;
      } else {
        const auto& lf = std::get<LevelSetFactor>(factor);
        auto j = schema.find(lf.column);
        if (!j) throw DataError("term '" + term.name + "': missing column '" + lf.column + "'");
        if (!schema[*j].is_categorical())
          throw DataError("term '" + term.name + "': column '" + lf.column + "' is not categorical");
        bf.column = *j;
        bf.numeric = false;
        bf.in_set.assign(schema[*j].levels.size(), 0);
        for (const auto& level : lf.levels) {
          auto code = schema.level_code(*j, level);
          if (!code)
            throw DataError("term '" + term.name + "': level '" + level + "' is not declared for column '" +
                            lf.column + "'");
          bf.in_set[*code] = 1;
        }
      }
      bound.push_back(std::move(bf));
    }
    terms_.push_back(std::move(bound));
  }
}

double BoundTerms::factor_value(const BoundFactor& f, double cell) {
  if (f.numeric) return (cell - f.center) * f.scale;
  return f.in_set[static_cast<std::size_t>(cell)] ? 1.0 : 0.0;
}

double BoundTerms::eval(const Dataset& ds, std::size_t term, std::size_t row) const {
  double v = 1.0;
  for (const auto& f : terms_[term]) v *= factor_value(f, ds.at(row, f.column));
  return v;
}

void BoundTerms::fill(const Dataset& ds, std::size_t term, double* out) const {
  const std::size_t n = ds.n_rows();
  std::fill(out, out + n, 1.0);
  for (const auto& f : terms_[term]) {
    auto col = ds.column(f.column);
    for (std::size_t i = 0; i < n; ++i) out[i] *= factor_value(f, col[i]);
  }
}

}  // namespace actugen

#include "actugen/claims_sim.hpp"

#include <algorithm>
#include <cmath>

#include "actugen/error.hpp"
#include "actugen/rng.hpp"

namespace actugen {

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "linear") return ScenarioKind::linear;
  if (name == "interaction") return ScenarioKind::interaction;
  throw ConfigError("unknown scenario '" + std::string(name) + "' (expected linear or interaction)");
}

std::string_view to_string(ScenarioKind kind) {
  return kind == ScenarioKind::linear ? "linear" : "interaction";
}

std::vector<std::string> Scenario::units() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (t.is_intercept()) continue;
    if (std::find(out.begin(), out.end(), t.unit) == out.end()) out.push_back(t.unit);
  }
  return out;
}

std::vector<std::string> Scenario::columns() const {
  std::vector<std::string> out;
  for (const auto& t : terms)
    for (const auto& c : t.columns())
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  return out;
}

void Scenario::validate() const {
  if (terms.size() != coefficients.size()) throw ConfigError("scenario: term/coefficient count mismatch");
  if (terms.empty() || !terms.front().is_intercept()) throw ConfigError("scenario: intercept must come first");
  for (std::size_t j = 1; j < terms.size(); ++j)
    if (terms[j].is_intercept()) throw ConfigError("scenario: more than one intercept");
  for (double c : coefficients)
    if (!std::isfinite(c)) throw ConfigError("scenario: non-finite coefficient");
}

Scenario builtin_scenario(ScenarioKind kind, ScenarioReading reading) {
  Scenario s;
  s.kind = kind;
  auto add = [&](Term t, double beta) {
    s.terms.push_back(std::move(t));
    s.coefficients.push_back(beta);
  };
  const auto area = [](std::vector<std::string> l) { return Term::level_set("AREA", std::move(l)); };
  const auto power = [](std::vector<std::string> l) { return Term::level_set("VEHICLE_POWER", std::move(l)); };
  const auto brand = [](std::vector<std::string> l) { return Term::level_set("VEHICLE_BRAND", std::move(l)); };
  const auto gas = [](std::vector<std::string> l) { return Term::level_set("VEHICLE_GAS", std::move(l)); };

  add(Term::intercept(), -3.0);
  add(Term::numeric("VEHICLE_AGE", 5.0), 0.0075);
  add(Term::numeric("DRIVER_AGE", 35.0), 0.0075);
  add(Term::numeric("BONUS_MALUS", 100.0), 0.0075);
  add(area({"A", "C", "E"}), 0.15);
  add(area({"B", "F"}), -0.5);
  add(power({"4", "5", "6"}), -0.5);
  add(power({"7", "8", "9"}), -0.4);
  add(power({"12", "13", "14"}), 0.15);
  add(power({"15"}), 0.3);
  add(brand({"B3", "B4", "B5"}), -0.5);
  add(brand({"B10", "B11"}), 0.2);
  add(brand({"B13", "B14"}), 0.6);
  add(gas({"Diesel"}), 0.45);

  if (kind == ScenarioKind::interaction) {
    const Term bm = Term::numeric("BONUS_MALUS");
    const Term va = Term::numeric("VEHICLE_AGE");
    const std::vector<std::string> power_high = {"10", "11", "12", "13", "14", "15"};
    add(Term::product(bm, area({"A", "B", "C"})), 0.0015);
    add(Term::product(bm, area({"D", "E"})), -0.003);
    add(Term::product(va, power(power_high)), 0.015);
    add(Term::product(va, power(reading.power_half_open_is_set ? std::vector<std::string>{"4", "5"}
                                                               : std::vector<std::string>{"5"})),
        -0.015);
    add(Term::product(gas({"Diesel"}), power({"4", "5", "6", "7"})), 0.15);
    add(Term::product(gas({"Regular"}), power(power_high)), -0.25);
    add(Term::product(area({"A", "B", "D"}), brand({"B1", "B4", "B10"})), 0.4);
    add(Term::product(area({"C", "D", "E"}), brand({"B2", "B6", "B11", "B12"})), 0.2);
    add(Term::product(area(reading.area_lowercase_c_is_C ? std::vector<std::string>{"A", "C", "E", "F"}
                                                         : std::vector<std::string>{"A", "E", "F"}),
                      brand({"B3", "B5", "B13", "B14"})),
        -0.6);
    add(Term::product(area({"F"}), brand({"B1", "B2", "B12"})), -0.3);
  }
  s.validate();
  return s;
}

double eval_predictor(const Scenario& scenario, const Dataset& ds, std::size_t row) {
  BoundTerms bound(scenario.terms, ds.schema());
  double f = 0.0;
  for (std::size_t j = 0; j < bound.size(); ++j) f += scenario.coefficients[j] * bound.eval(ds, j, row);
  return f;
}

std::vector<double> linear_predictor(const Scenario& scenario, const Dataset& ds) {
  scenario.validate();
  BoundTerms bound(scenario.terms, ds.schema());
  const std::size_t n = ds.n_rows();
  std::vector<double> f(n, 0.0);
  std::vector<double> buf(n);
  for (std::size_t j = 0; j < bound.size(); ++j) {
    bound.fill(ds, j, buf.data());
    const double beta = scenario.coefficients[j];
    for (std::size_t i = 0; i < n; ++i) f[i] += beta * buf[i];
  }
  return f;
}

SimulatedResponse simulate_counts(const Dataset& ds, const Scenario& scenario, std::uint64_t seed) {
  const auto eta = linear_predictor(scenario, ds);
  Rng rng(seed);
  SimulatedResponse out;
  out.counts.resize(eta.size());
  double total = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    out.counts[i] = static_cast<double>(rng.poisson(std::exp(eta[i])));
    total += out.counts[i];
  }
  out.mean_frequency = eta.empty() ? 0.0 : total / static_cast<double>(eta.size());
  return out;
}

Dataset with_simulated_response(const Dataset& ds, const Scenario& scenario, std::uint64_t seed) {
  auto response = ds.schema().response();
  if (!response) throw DataError("dataset has no response column to simulate into");
  auto sim = simulate_counts(ds, scenario, seed);
  return with_unit_exposure(ds.with_column(*response, std::move(sim.counts)));
}

}  // namespace actugen

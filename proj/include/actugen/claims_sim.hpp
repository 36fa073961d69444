#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "actugen/tabular.hpp"
#include "actugen/terms.hpp"

namespace actugen {

enum class ScenarioKind { linear, interaction };

ScenarioKind parse_scenario_kind(std::string_view name);  // throws ConfigError
std::string_view to_string(ScenarioKind kind);

// How two level sets in the interaction formula are read. The printed
// formula has "{A,c,E,F}" and "(4,5}"; by default they are read as {A,C,E,F}
// and {4,5}. Switching a flag off takes the literal reading ({A,E,F}, {5}).
struct ScenarioReading {
  bool area_lowercase_c_is_C = true;
  bool power_half_open_is_set = true;
};

// A known log-rate f(x) = sum_j coefficient_j * term_j(x). The first term is
// the intercept and no other term is.
struct Scenario {
  ScenarioKind kind = ScenarioKind::linear;
  std::vector<Term> terms;
  std::vector<double> coefficients;

  // Selectable units in first-appearance order, intercept excluded.
  std::vector<std::string> units() const;
  // Columns referenced by any term.
  std::vector<std::string> columns() const;
  void validate() const;
};

Scenario builtin_scenario(ScenarioKind kind, ScenarioReading reading = {});

// f(x) for one row.
double eval_predictor(const Scenario& scenario, const Dataset& ds, std::size_t row);
// f(x_i) for every row.
std::vector<double> linear_predictor(const Scenario& scenario, const Dataset& ds);

struct SimulatedResponse {
  std::vector<double> counts;
  double mean_frequency = 0.0;
};

// Y_i ~ Poisson(exp(f(x_i))) with unit exposure; one sequential stream.
SimulatedResponse simulate_counts(const Dataset& ds, const Scenario& scenario, std::uint64_t seed);

// Copy of ds with the response column replaced by simulated counts and the
// exposure column (if any) set to 1.
Dataset with_simulated_response(const Dataset& ds, const Scenario& scenario, std::uint64_t seed);

}  // namespace actugen

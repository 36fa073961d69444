#pragma once

// Shared helpers for the unit tests.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "actugen/tabular.hpp"

namespace testing {

inline actugen::ColumnSpec categorical(std::string name, std::vector<std::string> levels) {
  return {std::move(name), actugen::ColumnKind::categorical, std::move(levels), actugen::ColumnRole::covariate, ""};
}

inline actugen::ColumnSpec numeric(std::string name, actugen::ColumnRole role = actugen::ColumnRole::covariate) {
  return {std::move(name), actugen::ColumnKind::numeric, {}, role, ""};
}

// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace testing

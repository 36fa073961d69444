#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actugen/tabular.hpp"

namespace actugen {

// t: training set included (0 or 1). L: synthetic parts appended.
struct StructureParam {
  std::size_t t = 1;
  std::size_t L = 0;

  void validate(std::size_t m) const;  // throws ConfigError
  std::string label() const;           // "(1,3)"
  // Synthetic rows relative to the training rows when parts are equal-sized.
  double proportion(std::size_t m) const { return static_cast<double>(L) / static_cast<double>(m); }

  bool operator==(const StructureParam&) const = default;
};

// (1,0), (1,1), ..., (1,m), (0,m).
std::vector<StructureParam> structure_grid(std::size_t m);

// Row indices of m disjoint parts of near-equal size (the first n mod m parts
// hold one extra row), ascending within each part.
std::vector<std::vector<std::size_t>> partition_rows(std::size_t n, std::size_t m, std::uint64_t seed);

std::vector<Dataset> partition_synthetic(const Dataset& syn, std::size_t m, std::uint64_t seed);

// Training rows (t = 1) followed by parts 1..L.
Dataset assemble(const Dataset& train, std::span<const Dataset> parts, StructureParam s);

}  // namespace actugen

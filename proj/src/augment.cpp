#include "actugen/augment.hpp"

#include <algorithm>
#include <numeric>

#include "actugen/error.hpp"
#include "actugen/rng.hpp"

namespace actugen {

void StructureParam::validate(std::size_t m) const {
  if (t > 1) throw ConfigError("structure parameter: t must be 0 or 1");
  if (t == 0 && L == 0) throw ConfigError("structure parameter (0,0) selects no data");
  if (L > m) throw ConfigError("structure parameter: L = " + std::to_string(L) + " exceeds m = " + std::to_string(m));
}

std::string StructureParam::label() const { return "(" + std::to_string(t) + "," + std::to_string(L) + ")"; }

std::vector<StructureParam> structure_grid(std::size_t m) {
  std::vector<StructureParam> grid;
  for (std::size_t L = 0; L <= m; ++L) grid.push_back({1, L});
  grid.push_back({0, m});
  return grid;
}

std::vector<std::vector<std::size_t>> partition_rows(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ConfigError("partition: m must be at least 1");
  if (m > n) throw ConfigError("partition: " + std::to_string(m) + " parts exceed " + std::to_string(n) + " rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  std::vector<std::vector<std::size_t>> parts(m);
  std::size_t pos = 0;
  for (std::size_t p = 0; p < m; ++p) {
    const std::size_t size = n / m + (p < n % m ? 1 : 0);
    parts[p].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(parts[p].begin(), parts[p].end());
    pos += size;
  }
  return parts;
}

std::vector<Dataset> partition_synthetic(const Dataset& syn, std::size_t m, std::uint64_t seed) {
  std::vector<Dataset> out;
  for (const auto& rows : partition_rows(syn.n_rows(), m, seed)) out.push_back(syn.select_rows(rows));
  return out;
}

Dataset assemble(const Dataset& train, std::span<const Dataset> parts, StructureParam s) {
  s.validate(parts.size());
  for (std::size_t l = 0; l < s.L; ++l)
    if (!(parts[l].schema() == train.schema())) throw DataError("synthetic part " + std::to_string(l + 1) + " has a different schema");
  Dataset out = s.t == 1 ? train : parts[0];
  for (std::size_t l = s.t == 1 ? 0 : 1; l < s.L; ++l) out = concat_rows(out, parts[l]);
  return out;
}

}  // namespace actugen

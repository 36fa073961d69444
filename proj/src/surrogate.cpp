#include "actugen/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "actugen/error.hpp"
#include "actugen/rng.hpp"

namespace actugen {

namespace {

// Level counts in schema level order.
const std::vector<double> kArea{103957, 75459, 191880, 151596, 137167, 17954};
const std::vector<double> kPower{115349, 124821, 148976, 145401, 46956, 30085,
                                 31354,  18352,  8214,   3229,   2350,  2926};
const std::vector<double> kBrand{162736, 159861, 53395, 25179, 34753, 28548, 17707, 13585, 166024, 12178, 4047};
const std::vector<double> kGas{332136, 345877};
// R11 R21 R22 R23 R24 R25 R26 R31 R41 R42 R43 R52 R53 R54 R72 R73 R74 R82 R83 R91 R93 R94
const std::vector<double> kRegion{69791, 3026,  7994,  8784,  160601, 10893, 10492, 27285, 12990, 2200, 1326,
                                  38751, 42122, 19046, 31329, 17141,  4567,  84752, 5287,  35805, 79315, 4516};

// Largest-remainder apportionment of n rows to the weights.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t n) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = weights[k] / total * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    used += counts[k];
    rem.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++counts[rem[i % rem.size()].second];
  return counts;
}

std::vector<double> shuffled_codes(const std::vector<double>& weights, std::size_t n, Rng& rng) {
  std::vector<double> codes;
  codes.reserve(n);
  const auto counts = apportion(weights, n);
  for (std::size_t k = 0; k < counts.size(); ++k) codes.insert(codes.end(), counts[k], static_cast<double>(k));
  for (std::size_t i = n; i > 1; --i) std::swap(codes[i - 1], codes[rng.uniform_index(i)]);
  return codes;
}

}  // namespace

Dataset surrogate_portfolio(std::size_t n_rows, std::uint64_t seed) {
  if (n_rows == 0) throw ConfigError("surrogate_portfolio: need at least one row");
  Schema schema = fremtpl2_schema();
  Rng shuffle(derive_seed(seed, "levels"));
  auto area = shuffled_codes(kArea, n_rows, shuffle);
  auto power = shuffled_codes(kPower, n_rows, shuffle);
  auto brand = shuffled_codes(kBrand, n_rows, shuffle);
  auto gas = shuffled_codes(kGas, n_rows, shuffle);
  auto region = shuffled_codes(kRegion, n_rows, shuffle);

  std::mt19937_64 gen(derive_seed(seed, "numeric"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> vehicle_age(1.58, 4.45);
  std::gamma_distribution<double> driver_excess(3.8, 7.23);
  std::gamma_distribution<double> malus_excess(1.6, 9.0);
  // ln(density) centre by area.
  const double log_density[] = {3.3, 4.3, 5.4, 6.7, 8.0, 9.7};

  std::vector<double> claims(n_rows), exposure(n_rows), veh_age(n_rows), drv_age(n_rows), bm(n_rows),
      density(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    exposure[i] = unif(gen) < 0.3 ? 1.0 : std::round((0.003 + 0.997 * unif(gen)) * 1000.0) / 1000.0;
    veh_age[i] = std::min(100.0, std::round(vehicle_age(gen)));
    const double age = std::min(100.0, std::round(18.0 + driver_excess(gen)));
    drv_age[i] = age;
    const double p50 = 1.0 / (1.0 + std::exp(-(0.36 + 0.085 * (age - 45.5))));
    if (unif(gen) < p50) {
      bm[i] = 50.0;
    } else {
      const double youth = std::max(0.0, 45.0 - age);
      bm[i] = std::min(230.0, std::round(51.0 + malus_excess(gen) + 1.1 * youth));
    }
    const double ld = log_density[static_cast<std::size_t>(area[i])] + 0.45 * normal(gen);
    density[i] = std::clamp(std::round(std::exp(ld)), 1.0, 27000.0);
  }
  Rng counts(derive_seed(seed, "claims"));
  for (std::size_t i = 0; i < n_rows; ++i) claims[i] = static_cast<double>(counts.poisson(0.1 * exposure[i]));

  return Dataset(std::move(schema), {std::move(claims), std::move(exposure), std::move(area), std::move(power),
                                     std::move(veh_age), std::move(drv_age), std::move(bm), std::move(brand),
                                     std::move(gas), std::move(density), std::move(region)});
}

}  // namespace actugen

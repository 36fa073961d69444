#pragma once

#include <cstddef>
#include <cstdint>

#include "actugen/tabular.hpp"

namespace actugen {

inline constexpr std::size_t kPortfolioRows = 678013;

// Synthetic stand-in for the French MTPL frequency portfolio, under the
// fremtpl2 schema. At the full row count the AREA, VEHICLE_POWER,
// VEHICLE_BRAND and VEHICLE_GAS level counts equal the published ones;
// REGION counts and the numeric covariates follow published summaries
// approximately. Other row counts scale the level counts proportionally.
// ClaimNb is a placeholder Poisson(0.1 * Exposure) draw.
Dataset surrogate_portfolio(std::size_t n_rows = kPortfolioRows, std::uint64_t seed = 20240101);

}  // namespace actugen

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace actugen {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; every distribution below is implemented here
// rather than through <random> distributions so that draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Poisson(rate) draw. Sequential inversion below rate 10, Hormann's
  // transformed rejection (PTRS) above.
  std::uint64_t poisson(double rate);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over the bytes of `tag`.
std::uint64_t hash_tag(std::string_view tag);

// Deterministic child seed: splitmix64 chain over (parent, tag hash, index).
// Every seed used by the library is derived through this function so that a
// single master seed fixes a whole experiment.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0);

}  // namespace actugen

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace fairvec {

/// xoshiro256** seeded through splitmix64.
///
/// The generator is spelled out here rather than taken from <random> so that
/// a seed produces the same stream on every platform and standard library.
/// Normal deviates use the Marsaglia polar method; integer ranges use
/// rejection sampling; shuffles are Fisher-Yates driven by `below`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic child seed for an independent sub-stream (fold, subgroup, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fairvec

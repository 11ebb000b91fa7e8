#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace treegcn {

// Seedable generator built on the 64-bit Mersenne Twister (std::mt19937_64,
// whose output sequence is fixed by the C++ standard). Every conversion to
// floating point or bounded integers is done here rather than through the
// implementation-defined <random> distributions, so streams are reproducible
// across standard libraries.
//
// Named sub-streams: stream(seed, "sampling", i) seeds the engine with
// splitmix64(seed ^ fnv1a64(name) ^ splitmix64(i)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (one draw per call, second value discarded).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace treegcn

#include "treegcn/rng.hpp"

#include <cmath>
#include <numbers>

#include "treegcn/error.hpp"

namespace treegcn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kGeometry: return "geometry error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return Rng(splitmix64(seed ^ fnv1a64(name) ^ splitmix64(index)));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) raise(ErrorKind::kContract, "Rng::below requires n > 0");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace treegcn

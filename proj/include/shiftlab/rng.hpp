#pragma once

#include <cstdint>

namespace shiftlab {

// Counter-based splittable generator. A draw is a pure function of
// (seed, step, lane, attempt), so replaying a trace needs no hidden state and
// resampling one variable never perturbs another's stream.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t draw(std::uint64_t seed, std::uint64_t step, std::uint64_t lane,
                          std::uint64_t attempt = 0) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ull);
  h = mix64(h ^ mix64(step ^ 0x13198a2e03707344ull));
  h = mix64(h ^ mix64(lane ^ 0xa4093822299f31d0ull));
  return mix64(h ^ mix64(attempt ^ 0x082efa98ec4e6c89ull));
}

// Unbiased range reduction by rejection; deterministic because the attempt
// counter is part of the key.
inline std::uint64_t uniform_below(std::uint64_t seed, std::uint64_t step,
                                   std::uint64_t lane, std::uint64_t m) {
  const std::uint64_t reject_below = (0 - m) % m;  // 2^64 mod m
  std::uint64_t attempt = 0;
  for (;;) {
    std::uint64_t d = draw(seed, step, lane, attempt++);
    if (d >= reject_below) return d % m;
  }
}

}  // namespace rng
}  // namespace shiftlab

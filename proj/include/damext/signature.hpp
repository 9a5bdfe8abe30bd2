#pragma once

#include <cstdint>

namespace damext {

/// Hash of the boolean decisions (relu signs, hinge activity, clamps) taken
/// during one loss evaluation. Finite-difference probes compare signatures at
/// x+h and x-h; a mismatch means the probe straddled a nondifferentiable
/// point and that parameter is excluded from the comparison.
inline std::uint64_t sig_init() { return 0xcbf29ce484222325ULL; }

inline std::uint64_t sig_push(std::uint64_t h, bool bit) {
  h ^= bit ? 0x9e3779b97f4a7c15ULL : 0x517cc1b727220a95ULL;
  h *= 0x100000001b3ULL;
  return h;
}

inline std::uint64_t sig_mix(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

}  // namespace damext

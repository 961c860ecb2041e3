#pragma once

#include <cstdint>
#include <initializer_list>

namespace graphident {

/// SplitMix64 finalizer over a running combination of the inputs; used to
/// derive independent, reproducible seeds for sub-tasks.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t z = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) {
    z += 0x9e3779b97f4a7c15ULL + p;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  }
  return z;
}

}  // namespace graphident

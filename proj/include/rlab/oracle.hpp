#pragma once

// Brute-force laws by enumerating every sign vector. Only for small n.

#include <cstdint>
#include <map>
#include <span>

#include "rlab/error.hpp"

namespace rlab::oracle {

/// Multiplicity of each value of sum eps_i a_i over all 2^n sign vectors.
inline std::map<std::int64_t, std::uint64_t> enumerate_walk(std::span<const std::int64_t> steps) {
  if (steps.size() > 26) throw InfeasibleError("enumerate_walk: at most 26 steps");
  std::map<std::int64_t, std::uint64_t> counts;
  const std::uint64_t total = std::uint64_t{1} << steps.size();
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    std::int64_t x = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) x += ((mask >> i) & 1U) ? steps[i] : -steps[i];
    ++counts[x];
  }
  return counts;
}

}  // namespace rlab::oracle

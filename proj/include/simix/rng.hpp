#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace simix {

using Rng = std::mt19937_64;

// Derives an independent seed for a named substream. The same (seed, name,
// indices) always yields the same value, so a job's random draws depend only
// on its identity and never on which worker runs it or in what order.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                             std::initializer_list<std::uint64_t> indices = {});

inline Rng make_stream(std::uint64_t seed, std::string_view name,
                       std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(substream_seed(seed, name, indices));
}

}  // namespace simix

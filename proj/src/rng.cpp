#include "simix/rng.hpp"

#include "simix/error.hpp"

namespace simix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                             std::initializer_list<std::uint64_t> indices) {
  std::uint64_t state = splitmix64(seed ^ splitmix64(fnv1a(name)));
  for (std::uint64_t index : indices) {
    state = splitmix64(state ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  }
  return state;
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_bandwidth: return "invalid-bandwidth";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::empty_data: return "empty-data";
    case ErrorKind::degenerate_span: return "degenerate-span";
    case ErrorKind::shape: return "shape";
    case ErrorKind::starved_neighborhood: return "starved-neighborhood";
    case ErrorKind::degenerate_index: return "degenerate-index";
    case ErrorKind::rank_deficiency: return "rank-deficiency";
    case ErrorKind::slicing: return "slicing";
    case ErrorKind::component_collapse: return "component-collapse";
    case ErrorKind::domain: return "domain";
    case ErrorKind::too_many_failures: return "too-many-failures";
  }
  return "unknown";
}

}  // namespace simix

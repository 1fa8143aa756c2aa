#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace shiftlab {

// Resource ceilings for the exhaustive algorithms. Every enumeration that can
// blow up checks one of these and throws CapExceeded instead of thrashing.
struct Caps {
  std::uint64_t table_entries = 1ull << 24;  // configuration tables: k^|G| * |G|
  std::uint64_t pattern_count = 1ull << 24;  // extensional pattern/assignment sets
  std::uint64_t search_nodes = 1ull << 20;   // exact subset searches
  std::uint64_t brute_force_space = 1ull << 24;
  std::uint64_t reduced_colors = 1ull << 20;  // uniformized color count in list reduction
};

class CapExceeded : public std::runtime_error {
 public:
  explicit CapExceeded(const std::string& what) : std::runtime_error(what) {}
};

// SHIFTLAB_CAP overrides every ceiling with one value.
inline Caps default_caps() {
  Caps c;
  if (const char* env = std::getenv("SHIFTLAB_CAP")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) {
      c.table_entries = v;
      c.pattern_count = v;
      c.search_nodes = v;
      c.brute_force_space = v;
      c.reduced_colors = v;
    }
  }
  return c;
}

inline void check_cap(std::uint64_t need, std::uint64_t cap, const char* what) {
  if (need > cap)
    throw CapExceeded(std::string(what) + ": needs " + std::to_string(need) +
                      " > cap " + std::to_string(cap));
}

}  // namespace shiftlab

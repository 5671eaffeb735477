#pragma once

#include <cstdint>
#include <random>

namespace ppflow::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seed for child stream `index` of a master seed.
//
// Counter scheme: mix the master once with splitmix64, fold in the
// (1-based) counter, and mix again. Replicate b of any parallel loop uses
// derive_stream(master, b), so results do not depend on scheduling order.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  const std::uint64_t mixed = splitmix64(s);
  s = mixed ^ ((index + 1) * 0xd1342543de82ef95ull);
  return splitmix64(s);
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace ppflow::rng

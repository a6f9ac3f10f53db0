#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace rbc {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

/// Keyed hash of lattice coordinates. The same (key, coordinate) always
/// gives the same word, which is what makes one boundary field consistent
/// across all concentric volumes. Coordinates are packed 21 bits per axis,
/// so they must stay within +-2^20.
class CoordHasher {
 public:
  explicit constexpr CoordHasher(std::uint64_t key) noexcept : key_(mix64(key ^ 0x51ed270b27e5e1a3ULL)) {}

  std::uint64_t operator()(std::span<const std::int64_t> coord) const noexcept {
    std::uint64_t packed = 0;
    for (std::size_t k = 0; k < coord.size() && k < 3; ++k)
      packed |= (static_cast<std::uint64_t>(coord[k]) & 0x1fffffULL) << (21 * k);
    return mix64(mix64(packed) ^ key_);
  }

  int sign(std::span<const std::int64_t> coord) const noexcept { return ((*this)(coord) >> 63) ? 1 : -1; }

 private:
  std::uint64_t key_;
};

inline std::uint64_t hash_coord(std::uint64_t key, std::span<const std::int64_t> coord) noexcept {
  return CoordHasher(key)(coord);
}

/// Fair +-1 value attached to a coordinate.
inline int sign_at(std::uint64_t key, std::span<const std::int64_t> coord) noexcept {
  return (hash_coord(key, coord) >> 63) ? 1 : -1;
}

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits. Spelled out rather than
/// using std::uniform_real_distribution so streams are identical across
/// standard library implementations.
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int random_sign(Rng& rng) noexcept { return (rng() >> 63) ? 1 : -1; }

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) noexcept {
  // Rejection keeps the result free of modulo bias.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace rbc

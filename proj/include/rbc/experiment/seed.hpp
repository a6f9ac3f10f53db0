#pragma once

#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

#include "rbc/rng.hpp"

namespace rbc {

/// One element of a task path: a label or an index. Labels and indices are
/// tagged differently, so "3" and 3 never collide.
class SeedPathElement {
 public:
  SeedPathElement(std::string_view label) : v_(hash_combine(0x6c6162656cULL, hash_string(label))) {}
  SeedPathElement(const char* label) : SeedPathElement(std::string_view(label)) {}
  template <std::integral I>
  SeedPathElement(I index) : v_(hash_combine(0x696e646578ULL, static_cast<std::uint64_t>(index))) {}
  std::uint64_t value() const noexcept { return v_; }

 private:
  std::uint64_t v_;
};

inline std::uint64_t derive_seed(std::uint64_t master, std::span<const SeedPathElement> path) {
  std::uint64_t h = mix64(master ^ 0x2545f4914f6cdd1dULL);
  for (const auto& e : path) h = hash_combine(h, e.value());
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<SeedPathElement> path) {
  return derive_seed(master, std::span<const SeedPathElement>(path.begin(), path.size()));
}

}  // namespace rbc

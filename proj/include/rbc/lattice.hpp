#pragma once

// Geometry, spin configurations, boundary conditions and the nearest-neighbour
// Hamiltonian
//
//   H(sigma, eta) = sum_{<ij> in box} J sigma_i sigma_j
//                 + sum_{<ij>, i in box, j outside} J' sigma_i eta_j
//
// with the inverse temperature absorbed into J, J' (Gibbs weight exp(-H)).
// J < 0 is ferromagnetic.
//
// Sites are indexed row-major with axis 0 fastest:
//   site = x0 + e0 * (x1 + e1 * x2).
// Each box is placed so that the absolute origin is the local point
// (floor(e0/2), floor(e1/2), ...); boxes of growing size are therefore
// concentric up to one lattice unit and share one absolute coordinate frame.

#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rbc/rng.hpp"

namespace rbc {

using Coord = std::array<std::int64_t, 3>;  // unused axes stay 0

struct Bond {
  std::uint32_t i;
  std::uint32_t j;
};

/// Bond from an inside site to the boundary-shell site with index `shell`.
struct BoundaryBond {
  std::uint32_t site;
  std::uint32_t shell;
};

/// Calls fn(inside_site, outside_coord) for every boundary bond of the box.
/// Order: axis 0..d-1, low face before high face, inside sites of a face in
/// increasing site index. Never touches interior sites, so it is cheap even
/// for very large boxes.
template <class Fn>
void for_each_boundary_bond(std::span<const int> extent, std::span<const std::int64_t> lower,
                            Fn&& fn) {
  const int d = static_cast<int>(extent.size());
  std::array<std::uint64_t, 3> stride{1, 1, 1};
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * static_cast<std::uint64_t>(extent[k - 1]);

  for (int axis = 0; axis < d; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const int fixed = side == 0 ? 0 : extent[axis] - 1;
      std::array<int, 3> local{0, 0, 0};
      local[axis] = fixed;
      while (true) {
        std::uint64_t site = 0;
        Coord out{0, 0, 0};
        for (int k = 0; k < d; ++k) {
          site += stride[k] * static_cast<std::uint64_t>(local[k]);
          out[k] = lower[k] + local[k];
        }
        out[axis] += side == 0 ? -1 : 1;
        fn(static_cast<std::uint32_t>(site), std::as_const(out));

        // Odometer over the face axes, lowest axis fastest.
        int k = 0;
        for (; k < d; ++k) {
          if (k == axis) continue;
          if (++local[k] < extent[k]) break;
          local[k] = 0;
        }
        if (k == d) break;
      }
    }
  }
}

inline std::int64_t centered_lower(int extent) { return -static_cast<std::int64_t>(extent / 2); }

class Volume {
 public:
  Volume() = default;

  /// Cubic box of linear size n in dimension 2 or 3.
  static Volume cube(int dim, int n) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
    if (n < 1) throw std::invalid_argument("linear size must be >= 1");
    return Volume(std::vector<int>(static_cast<std::size_t>(dim), n));
  }

  /// Rectangular box; used by the exact solvers on strips.
  static Volume box(std::vector<int> extent) {
    if (extent.size() != 2 && extent.size() != 3)
      throw std::invalid_argument("dimension must be 2 or 3");
    for (int e : extent)
      if (e < 1) throw std::invalid_argument("extent must be >= 1");
    return Volume(std::move(extent));
  }

  int dim() const noexcept { return static_cast<int>(extent_.size()); }
  int size() const noexcept { return extent_[0]; }
  std::span<const int> extent() const noexcept { return extent_; }
  int extent(int axis) const { return extent_.at(static_cast<std::size_t>(axis)); }
  bool is_cube() const {
    for (int e : extent_)
      if (e != extent_[0]) return false;
    return true;
  }
  std::size_t num_sites() const noexcept { return num_sites_; }
  std::uint32_t stride(int axis) const { return strides_.at(static_cast<std::size_t>(axis)); }
  std::span<const std::int64_t> lower() const noexcept { return {lower_.data(), extent_.size()}; }

  std::array<int, 3> local(std::uint32_t site) const {
    std::array<int, 3> x{0, 0, 0};
    for (int k = 0; k < dim(); ++k) {
      x[k] = static_cast<int>(site % static_cast<std::uint32_t>(extent_[k]));
      site /= static_cast<std::uint32_t>(extent_[k]);
    }
    return x;
  }

  Coord coord(std::uint32_t site) const {
    auto x = local(site);
    Coord c{0, 0, 0};
    for (int k = 0; k < dim(); ++k) c[k] = lower_[k] + x[k];
    return c;
  }

  std::uint32_t site_at(std::span<const int> x) const {
    std::uint32_t s = 0;
    for (int k = 0; k < dim(); ++k) {
      if (x[k] < 0 || x[k] >= extent_[k]) throw std::out_of_range("coordinate outside the box");
      s += strides_[k] * static_cast<std::uint32_t>(x[k]);
    }
    return s;
  }

  /// The site sitting at absolute coordinate 0.
  std::uint32_t origin_site() const {
    std::array<int, 3> x{0, 0, 0};
    for (int k = 0; k < dim(); ++k) x[k] = static_cast<int>(-lower_[k]);
    return site_at(std::span<const int>(x.data(), extent_.size()));
  }

  std::span<const Bond> bulk_bonds() const noexcept { return bulk_; }
  /// Wrap-around bonds used by periodic boundary conditions.
  std::span<const Bond> wrap_bonds() const noexcept { return wrap_; }
  std::span<const BoundaryBond> boundary_bonds() const noexcept { return boundary_; }
  /// Absolute coordinates of the boundary shell; boundary_bonds()[k].shell == k.
  std::span<const Coord> boundary_sites() const noexcept { return shell_; }

  bool operator==(const Volume& o) const { return extent_ == o.extent_; }

 private:
  explicit Volume(std::vector<int> extent) : extent_(std::move(extent)) {
    const int d = dim();
    num_sites_ = 1;
    for (int k = 0; k < d; ++k) {
      strides_[k] = static_cast<std::uint32_t>(num_sites_);
      num_sites_ *= static_cast<std::size_t>(extent_[k]);
      lower_[k] = centered_lower(extent_[k]);
    }
    if (num_sites_ > (std::size_t{1} << 31)) throw std::invalid_argument("box too large");

    for (std::uint32_t s = 0; s < num_sites_; ++s) {
      auto x = local(s);
      for (int k = 0; k < d; ++k) {
        if (x[k] + 1 < extent_[k]) bulk_.push_back({s, s + strides_[k]});
        else wrap_.push_back({s, s - strides_[k] * static_cast<std::uint32_t>(extent_[k] - 1)});
      }
    }
    for_each_boundary_bond(extent_, lower(), [&](std::uint32_t site, const Coord& out) {
      boundary_.push_back({site, static_cast<std::uint32_t>(shell_.size())});
      shell_.push_back(out);
    });
  }

  std::vector<int> extent_;
  std::array<std::uint32_t, 3> strides_{1, 1, 1};
  std::array<std::int64_t, 3> lower_{0, 0, 0};
  std::size_t num_sites_ = 0;
  std::vector<Bond> bulk_;
  std::vector<Bond> wrap_;
  std::vector<BoundaryBond> boundary_;
  std::vector<Coord> shell_;
};

inline Volume build_volume(int dim, int n) { return Volume::cube(dim, n); }

/// Dimensionless couplings (temperature absorbed). j < 0 is ferromagnetic.
struct Couplings {
  double j = -1.0;
  double j_prime = -1.0;
};

// Little-endian bit packing: byte k bit b <-> entry 8k+b, set bit <-> +1.
inline std::vector<std::uint8_t> pack_signs(std::span<const std::int8_t> v) {
  std::vector<std::uint8_t> out((v.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > 0) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

inline std::vector<std::int8_t> unpack_signs(std::span<const std::uint8_t> bytes, std::size_t n) {
  if (bytes.size() * 8 < n) throw std::invalid_argument("bit string too short");
  std::vector<std::int8_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = ((bytes[i / 8] >> (i % 8)) & 1u) ? 1 : -1;
  return v;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

inline std::vector<std::uint8_t> from_hex(std::string_view s) {
  if (s.size() % 2) throw std::invalid_argument("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(s[2 * i]) << 4 | nibble(s[2 * i + 1]));
  return out;
}

class SpinConfig {
 public:
  SpinConfig() = default;
  explicit SpinConfig(std::size_t n, int value = 1) : s_(n, static_cast<std::int8_t>(value > 0 ? 1 : -1)) {}
  explicit SpinConfig(std::vector<std::int8_t> values) : s_(std::move(values)) {
    for (auto v : s_)
      if (v != 1 && v != -1) throw std::invalid_argument("spins must be +-1");
  }

  /// Bit i of `word` is site i (set = +1). Requires n <= 64.
  static SpinConfig from_word(std::uint64_t word, std::size_t n) {
    if (n > 64) throw std::invalid_argument("word encoding holds at most 64 sites");
    SpinConfig c(n);
    for (std::size_t i = 0; i < n; ++i) c.s_[i] = ((word >> i) & 1u) ? 1 : -1;
    return c;
  }
  std::uint64_t to_word() const {
    if (s_.size() > 64) throw std::length_error("configuration too large for a word");
    std::uint64_t w = 0;
    for (std::size_t i = 0; i < s_.size(); ++i)
      if (s_[i] > 0) w |= std::uint64_t{1} << i;
    return w;
  }

  static SpinConfig from_bytes(std::span<const std::uint8_t> bytes, std::size_t n) {
    return SpinConfig(unpack_signs(bytes, n));
  }
  std::vector<std::uint8_t> to_bytes() const { return pack_signs(s_); }

  std::size_t size() const noexcept { return s_.size(); }
  int operator[](std::size_t i) const noexcept { return s_[i]; }
  void set(std::size_t i, int v) noexcept { s_[i] = static_cast<std::int8_t>(v > 0 ? 1 : -1); }
  std::span<const std::int8_t> values() const noexcept { return s_; }
  std::span<std::int8_t> values() noexcept { return s_; }
  long magnetization() const noexcept {
    return std::accumulate(s_.begin(), s_.end(), 0L);
  }

  bool operator==(const SpinConfig&) const = default;

 private:
  std::vector<std::int8_t> s_;
};

inline SpinConfig flip(const SpinConfig& c) {
  SpinConfig out = c;
  for (auto& v : out.values()) v = static_cast<std::int8_t>(-v);
  return out;
}

enum class BoundaryKind { symmetric_iid, all_plus, all_minus, dobrushin, explicit_values, free, periodic };

inline std::string_view to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::symmetric_iid: return "symmetric_iid";
    case BoundaryKind::all_plus: return "all_plus";
    case BoundaryKind::all_minus: return "all_minus";
    case BoundaryKind::dobrushin: return "dobrushin";
    case BoundaryKind::explicit_values: return "explicit";
    case BoundaryKind::free: return "free";
    case BoundaryKind::periodic: return "periodic";
  }
  return "?";
}

/// Boundary values, one per boundary-shell site of a volume. Free and
/// periodic conditions carry no values.
struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::free;
  std::uint64_t seed = 0;
  std::vector<std::int8_t> values;

  bool has_values() const noexcept {
    return kind != BoundaryKind::free && kind != BoundaryKind::periodic;
  }
  long sum() const noexcept { return std::accumulate(values.begin(), values.end(), 0L); }
  std::vector<std::uint8_t> to_bytes() const { return pack_signs(values); }
  bool operator==(const BoundaryCondition&) const = default;
};

/// Boundary value of the infinite symmetric i.i.d. field with key `seed`.
inline int iid_value(std::uint64_t seed, const Coord& c) { return sign_at(seed, c); }

inline BoundaryCondition sample_boundary(const Volume& vol, BoundaryKind kind, std::uint64_t seed = 0) {
  BoundaryCondition bc;
  bc.kind = kind;
  bc.seed = seed;
  if (!bc.has_values()) return bc;
  if (kind == BoundaryKind::explicit_values)
    throw std::invalid_argument("explicit boundary values must be supplied");
  const auto shell = vol.boundary_sites();
  bc.values.resize(shell.size());
  for (std::size_t k = 0; k < shell.size(); ++k) {
    int v = 1;
    switch (kind) {
      case BoundaryKind::symmetric_iid: v = iid_value(seed, shell[k]); break;
      case BoundaryKind::all_plus: v = 1; break;
      case BoundaryKind::all_minus: v = -1; break;
      case BoundaryKind::dobrushin: v = shell[k][0] < 0 ? -1 : 1; break;  // minus on the left
      default: break;
    }
    bc.values[k] = static_cast<std::int8_t>(v);
  }
  return bc;
}

inline BoundaryCondition explicit_boundary(const Volume& vol, std::vector<std::int8_t> values) {
  if (values.size() != vol.boundary_sites().size())
    throw std::invalid_argument("boundary value count does not match the shell");
  for (auto v : values)
    if (v != 1 && v != -1) throw std::invalid_argument("boundary values must be +-1");
  return {BoundaryKind::explicit_values, 0, std::move(values)};
}

inline BoundaryCondition flip(const BoundaryCondition& bc) {
  BoundaryCondition out = bc;
  for (auto& v : out.values) v = static_cast<std::int8_t>(-v);
  switch (bc.kind) {
    case BoundaryKind::all_plus: out.kind = BoundaryKind::all_minus; break;
    case BoundaryKind::all_minus: out.kind = BoundaryKind::all_plus; break;
    case BoundaryKind::symmetric_iid:
    case BoundaryKind::dobrushin: out.kind = BoundaryKind::explicit_values; break;
    default: break;
  }
  return out;
}

inline void check_domain(const Volume& vol, const SpinConfig& s, const BoundaryCondition& bc) {
  if (s.size() != vol.num_sites())
    throw std::invalid_argument("configuration does not match the volume");
  if (bc.has_values() && bc.values.size() != vol.boundary_sites().size())
    throw std::invalid_argument("boundary condition does not cover the boundary shell");
}

/// Direct bond-by-bond evaluation of the Hamiltonian.
inline double hamiltonian(const Volume& vol, const Couplings& c, const SpinConfig& s,
                          const BoundaryCondition& bc) {
  check_domain(vol, s, bc);
  double h = 0.0;
  for (const auto& b : vol.bulk_bonds()) h += c.j * s[b.i] * s[b.j];
  if (bc.kind == BoundaryKind::periodic) {
    for (const auto& b : vol.wrap_bonds()) h += c.j * s[b.i] * s[b.j];
  } else if (bc.has_values()) {
    for (const auto& b : vol.boundary_bonds()) h += c.j_prime * s[b.site] * bc.values[b.shell];
  }
  return h;
}

struct WeightedBond {
  std::uint32_t i;
  std::uint32_t j;
  double coupling;
};

/// Volume + couplings + boundary reduced to a pair-coupling list and a site
/// field: H = sum_b coupling_b s_i s_j + sum_i field_i s_i. This is the form
/// every solver consumes; per-bond couplings allow gauge-transformed and
/// line-defect models.
struct Model {
  Volume volume;
  std::vector<WeightedBond> bonds;
  std::vector<double> field;
};

inline Model make_model(const Volume& vol, const Couplings& c, const BoundaryCondition& bc) {
  if (bc.has_values() && bc.values.size() != vol.boundary_sites().size())
    throw std::invalid_argument("boundary condition does not cover the boundary shell");
  Model m{vol, {}, std::vector<double>(vol.num_sites(), 0.0)};
  m.bonds.reserve(vol.bulk_bonds().size());
  for (const auto& b : vol.bulk_bonds()) m.bonds.push_back({b.i, b.j, c.j});
  if (bc.kind == BoundaryKind::periodic) {
    for (const auto& b : vol.wrap_bonds()) m.bonds.push_back({b.i, b.j, c.j});
  } else if (bc.has_values()) {
    for (const auto& b : vol.boundary_bonds()) m.field[b.site] += c.j_prime * bc.values[b.shell];
  }
  return m;
}

inline double hamiltonian(const Model& m, const SpinConfig& s) {
  if (s.size() != m.volume.num_sites()) throw std::invalid_argument("configuration does not match the model");
  double h = 0.0;
  for (const auto& b : m.bonds) h += b.coupling * s[b.i] * s[b.j];
  for (std::size_t i = 0; i < s.size(); ++i) h += m.field[i] * s[i];
  return h;
}

}  // namespace rbc

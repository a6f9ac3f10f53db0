#pragma once

// Plus/minus ensemble membership of a configuration.
//
// In two dimensions a configuration is cut into contours: connected sets of
// dual edges separating disagreeing neighbours (dual edges meeting at a
// vertex belong to the same contour). Each contour has an interior and an
// exterior:
//  * a contour that does not reach the box boundary encloses its interior;
//  * a contour that ends on the boundary splits the box; the piece holding at
//    least three of the four corners is the exterior (a lone corner cut off
//    is interior).
// The sea is the set of sites exterior to every contour and its spin is the
// label. When some contour separates two corners from the other two (an
// interface) the label is the majority sign of the inner-boundary layer,
// with an exact tie resolved by the spin at the origin so that flipping
// every spin always flips the label.
//
// In three dimensions the label is the sign of the magnetization, with the
// same origin tie-break.

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>

#include "rbc/lattice.hpp"

namespace rbc {

enum class EnsembleLabel : std::uint8_t { Plus = 0, Minus = 1 };

inline EnsembleLabel opposite(EnsembleLabel l) {
  return l == EnsembleLabel::Plus ? EnsembleLabel::Minus : EnsembleLabel::Plus;
}

struct ContourAnalysis {
  EnsembleLabel label = EnsembleLabel::Plus;
  bool interface = false;
  bool sea_empty = false;
  bool sea_uniform = true;
  int contours = 0;
  int max_length = 0;
};

/// Contour analysis on configurations packed into a word (bit i = site i is +1).
class ContourClassifier {
 public:
  explicit ContourClassifier(const Volume& vol) : n_(static_cast<int>(vol.num_sites())), dim_(vol.dim()) {
    if (vol.num_sites() > 64) throw std::invalid_argument("contour classification limited to 64 sites");
    all_ = n_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_) - 1;
    for (const auto& b : vol.boundary_bonds()) layer_ |= std::uint64_t{1} << b.site;
    origin_ = static_cast<int>(vol.origin_site());
    if (dim_ != 2) return;

    w_ = vol.extent(0);
    h_ = vol.extent(1);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        const int i = x + w_ * y;
        if (x + 1 < w_) {
          hmask_ |= std::uint64_t{1} << i;
          if (y == 0 || y + 1 == h_) htouch_ |= std::uint64_t{1} << i;
        }
        if (y + 1 < h_) {
          vmask_ |= std::uint64_t{1} << i;
          if (x == 0 || x + 1 == w_) vtouch_ |= std::uint64_t{1} << i;
        }
      }
    corners_ = (std::uint64_t{1} << 0) | (std::uint64_t{1} << (w_ - 1)) |
               (std::uint64_t{1} << (w_ * (h_ - 1))) | (std::uint64_t{1} << (n_ - 1));
    const int nc = std::popcount(corners_);
    exterior_corners_ = nc == 4 ? 3 : nc;
  }

  int num_sites() const noexcept { return n_; }

  ContourAnalysis analyze(std::uint64_t x) const {
    ContourAnalysis out;
    x &= all_;
    if (dim_ != 2) {
      out.label = majority(x, all_);
      return out;
    }
    const std::uint64_t hd = (x ^ (x >> 1)) & hmask_;
    const std::uint64_t vd = (x ^ (x >> w_)) & vmask_;
    if (!hd && !vd) {
      out.label = (x & 1) ? EnsembleLabel::Plus : EnsembleLabel::Minus;
      return out;
    }

    // Union-find over dual vertices (u, v), u in [0, w], v in [0, h].
    std::array<std::uint8_t, 160> parent;
    const int stride = w_ + 1;
    const int nv = stride * (h_ + 1);
    for (int k = 0; k < nv; ++k) parent[k] = static_cast<std::uint8_t>(k);
    auto find = [&](int a) {
      while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
      }
      return a;
    };
    auto unite = [&](int a, int b) {
      a = find(a);
      b = find(b);
      if (a != b) parent[a] = static_cast<std::uint8_t>(b);
    };
    // Horizontal bond i=(x,y)-(x+1,y): dual edge (x+1, y)-(x+1, y+1).
    for (std::uint64_t m = hd; m; m &= m - 1) {
      const int i = std::countr_zero(m);
      const int u = i % w_ + 1, v = i / w_;
      unite(u + stride * v, u + stride * (v + 1));
    }
    // Vertical bond i=(x,y)-(x,y+1): dual edge (x, y+1)-(x+1, y+1).
    for (std::uint64_t m = vd; m; m &= m - 1) {
      const int i = std::countr_zero(m);
      const int u = i % w_, v = i / w_ + 1;
      unite(u + stride * v, u + 1 + stride * v);
    }

    struct Contour {
      int root;
      std::uint64_t h;
      std::uint64_t v;
    };
    std::array<Contour, 64> cs;
    int nc = 0;
    auto slot = [&](int root) -> Contour& {
      for (int k = 0; k < nc; ++k)
        if (cs[k].root == root) return cs[k];
      cs[nc] = {root, 0, 0};
      return cs[nc++];
    };
    for (std::uint64_t m = hd; m; m &= m - 1) {
      const int i = std::countr_zero(m);
      slot(find(i % w_ + 1 + stride * (i / w_))).h |= std::uint64_t{1} << i;
    }
    for (std::uint64_t m = vd; m; m &= m - 1) {
      const int i = std::countr_zero(m);
      slot(find(i % w_ + stride * (i / w_ + 1))).v |= std::uint64_t{1} << i;
    }
    out.contours = nc;

    std::uint64_t sea = all_;
    for (int k = 0; k < nc; ++k) {
      const auto& c = cs[k];
      out.max_length = std::max(out.max_length, std::popcount(c.h) + std::popcount(c.v));
      const std::uint64_t ha = hmask_ & ~c.h, va = vmask_ & ~c.v;
      std::uint64_t exterior = 0;
      if (!((c.h & htouch_) | (c.v & vtouch_))) {
        exterior = flood(1, ha, va);  // site 0 is never enclosed
      } else {
        std::uint64_t left = corners_;
        while (left) {
          const std::uint64_t comp = flood(left & (~left + 1), ha, va);
          if (std::popcount(comp & corners_) >= exterior_corners_) {
            exterior = comp;
            break;
          }
          left &= ~comp;
        }
        if (!exterior) {
          out.interface = true;
          break;
        }
      }
      sea &= exterior;
    }

    if (out.interface || !sea) {
      out.sea_empty = !sea;
      out.label = majority(x, layer_);
      return out;
    }
    const std::uint64_t sea_plus = sea & x;
    out.sea_uniform = sea_plus == sea || sea_plus == 0;
    out.label = (x >> std::countr_zero(sea)) & 1 ? EnsembleLabel::Plus : EnsembleLabel::Minus;
    return out;
  }

  EnsembleLabel classify(std::uint64_t x) const { return analyze(x).label; }

 private:
  std::uint64_t flood(std::uint64_t f, std::uint64_t ha, std::uint64_t va) const {
    while (true) {
      const std::uint64_t g = f | ((f & ha) << 1) | ((f >> 1) & ha) | ((f & va) << w_) | ((f >> w_) & va);
      if (g == f) return f;
      f = g;
    }
  }

  EnsembleLabel majority(std::uint64_t x, std::uint64_t mask) const {
    const int plus = std::popcount(x & mask);
    const int minus = std::popcount(~x & mask);
    if (plus != minus) return plus > minus ? EnsembleLabel::Plus : EnsembleLabel::Minus;
    return (x >> origin_) & 1 ? EnsembleLabel::Plus : EnsembleLabel::Minus;
  }

  int n_;
  int dim_;
  int origin_ = 0;
  int w_ = 0;
  int h_ = 0;
  std::uint64_t all_ = 0;
  std::uint64_t layer_ = 0;
  std::uint64_t hmask_ = 0;
  std::uint64_t vmask_ = 0;
  std::uint64_t htouch_ = 0;
  std::uint64_t vtouch_ = 0;
  std::uint64_t corners_ = 0;
  int exterior_corners_ = 3;
};

inline EnsembleLabel classify_ensemble(const SpinConfig& s, const Volume& vol) {
  if (s.size() != vol.num_sites()) throw std::invalid_argument("configuration does not match the volume");
  return ContourClassifier(vol).classify(s.to_word());
}

}  // namespace rbc

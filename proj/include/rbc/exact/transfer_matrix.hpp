#pragma once

// Row-by-row transfer matrix on a W x H box, added one site at a time
// (helical order). The state is the last W spins; adding site i brings in
// its left neighbour (bit W-2 of the new state) and its upper neighbour (the
// bit that drops out). Optionally the running magnetization is tracked, with
// values beyond what the remaining sites can undo merged into an end slot.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rbc/exact/enumeration.hpp"
#include "rbc/lattice.hpp"
#include "rbc/stats.hpp"

namespace rbc {

inline constexpr int max_transfer_width = 16;
inline constexpr int max_resolved_transfer_width = 12;

struct TransferResult {
  Window window;
  double log_z = neg_inf;
  std::vector<double> expectations;
  bool resolved = false;
  double log_z_pos = neg_inf;
  double log_z_neg = neg_inf;
  double log_z_zero = neg_inf;
  std::vector<double> exp_pos;
  std::vector<double> exp_neg;
  std::vector<double> exp_zero;
};

namespace detail {

// Number of distinct magnetization slots kept after k of n sites: M has the
// parity of k, and once |M| > n - k the sign of the final M is fixed.
inline int magnetization_bound(int k, int n) {
  int l = std::min(k, n - k + 1);
  if ((l - k) % 2 != 0) ++l;
  return std::min(l, k);
}

}  // namespace detail

inline TransferResult transfer_matrix(const Model& model, const Window& window, bool resolve_magnetization) {
  const auto& vol = model.volume;
  if (vol.dim() != 2) throw std::invalid_argument("transfer matrix needs a two-dimensional box");
  const int w = vol.extent(0), h = vol.extent(1);
  if (w > max_transfer_width) throw std::invalid_argument("width over transfer-matrix limit");
  if (resolve_magnetization && w > max_resolved_transfer_width)
    throw std::invalid_argument("width over limit for magnetization resolution");
  const int n = w * h;
  detail::check_window(window, static_cast<std::size_t>(n));

  std::vector<double> hj(n, 0.0), vj(n, 0.0);  // bond to the right / below
  for (const auto& b : model.bonds) {
    const auto i = std::min(b.i, b.j), j = std::max(b.i, b.j);
    if (j == i + 1 && static_cast<int>(i % w) != w - 1) hj[i] += b.coupling;
    else if (j == i + static_cast<std::uint32_t>(w)) vj[i] += b.coupling;
    else throw std::invalid_argument("transfer matrix needs nearest-neighbour bonds");
  }

  const std::size_t states = std::size_t{1} << w;
  const std::size_t channels = 1 + window.size();
  auto spin = [](std::size_t s, int bit) { return (s >> bit) & 1 ? 1 : -1; };

  // Which step completes each observable, and how.
  enum class Mode { none, site, pair_left, pair_up };
  std::vector<std::vector<Mode>> mode_at(n, std::vector<Mode>(channels, Mode::none));
  std::vector<bool> first_row_done(channels, false);
  for (std::size_t c = 0; c < window.size(); ++c) {
    const auto& o = window[c];
    if (o.kind == Observable::Kind::unit) continue;
    const int a = static_cast<int>(std::min(o.a, o.b)), b = static_cast<int>(std::max(o.a, o.b));
    if (b < w) continue;  // resolved from the first row directly
    if (o.kind == Observable::Kind::site) mode_at[b][c + 1] = Mode::site;
    else if (b - a == 1 && b % w != 0) mode_at[b][c + 1] = Mode::pair_left;
    else if (b - a == w) mode_at[b][c + 1] = Mode::pair_up;
    else throw std::invalid_argument("transfer matrix window pairs must be nearest neighbours");
  }

  // Slot layout: buffer[(c * slots + j) * states + s].
  int l_cur = resolve_magnetization ? detail::magnetization_bound(w, n) : 0;
  int slots = resolve_magnetization ? l_cur + 1 : 1;
  std::vector<double> cur(channels * slots * states, 0.0);

  // First row.
  std::vector<double> e0(states);
  double e_min = 0;
  for (std::size_t s = 0; s < states; ++s) {
    double e = 0;
    for (int x = 0; x < w; ++x) {
      e += model.field[x] * spin(s, x);
      if (x + 1 < w) e += hj[x] * spin(s, x) * spin(s, x + 1);
    }
    e0[s] = e;
    e_min = s ? std::min(e_min, e) : e;
  }
  double log_scale = -e_min;
  for (std::size_t s = 0; s < states; ++s) {
    const double wt = std::exp(e_min - e0[s]);
    int j = 0;
    if (resolve_magnetization) {
      const int m = std::clamp(2 * std::popcount(s) - w, -l_cur, l_cur);
      j = (m + l_cur) / 2;
    }
    for (std::size_t c = 0; c < channels; ++c) {
      double v = wt;
      if (c > 0) {
        const auto& o = window[c - 1];
        const int b = static_cast<int>(std::max(o.a, o.b));
        if (o.kind != Observable::Kind::unit && b < w) v *= o.value(static_cast<std::uint64_t>(s));
      }
      cur[(c * slots + j) * states + s] = v;
    }
  }

  std::vector<double> next;
  const std::size_t half = states / 2, quarter = states / 4;
  for (int i = w; i < n; ++i) {
    const bool has_left = i % w != 0;
    const int l_new = resolve_magnetization ? detail::magnetization_bound(i + 1, n) : 0;
    const int slots_new = resolve_magnetization ? l_new + 1 : 1;
    next.assign(channels * slots_new * states, 0.0);

    // f[sigma][left][up] for sigma, left, up in {-1, +1} as bits.
    double f[2][2][2];
    for (int si = 0; si < 2; ++si)
      for (int sl = 0; sl < 2; ++sl)
        for (int su = 0; su < 2; ++su) {
          const int s = si ? 1 : -1, l = sl ? 1 : -1, u = su ? 1 : -1;
          const double local = vj[i - w] * u + (has_left ? hj[i - 1] * l : 0.0) + model.field[i];
          f[si][sl][su] = std::exp(-s * local);
        }

    for (std::size_t c = 0; c < channels; ++c) {
      const Mode mode = mode_at[i][c];
      for (int j = 0; j < slots; ++j) {
        const int m = resolve_magnetization ? -l_cur + 2 * j : 0;
        const double* src = &cur[(c * slots + j) * states];
        for (int si = 0; si < 2; ++si) {
          int jn = 0;
          if (resolve_magnetization) jn = (std::clamp(m + (si ? 1 : -1), -l_new, l_new) + l_new) / 2;
          double* dst = &next[(c * slots_new + jn) * states + (si ? half : 0)];
          for (int sl = 0; sl < 2; ++sl) {
            double a = f[si][sl][0], b = f[si][sl][1];
            const int s = si ? 1 : -1, l = sl ? 1 : -1;
            switch (mode) {
              case Mode::none: break;
              case Mode::site: a *= s; b *= s; break;
              case Mode::pair_left: a *= s * l; b *= s * l; break;
              case Mode::pair_up: a *= -s; b *= s; break;
            }
            // New state t (without its top bit) with left bit sl: its source
            // states are 2t and 2t+1.
            std::size_t lo = 0, hi = half;
            if (w >= 2) {
              lo = sl ? quarter : 0;
              hi = lo + quarter;
            } else if (sl) {
              continue;  // no left neighbour exists; use the sl = 0 pass only
            }
            for (std::size_t t = lo; t < hi; ++t) dst[t] += a * src[2 * t] + b * src[2 * t + 1];
          }
        }
      }
    }

    // Rescale by the largest partition-function entry.
    double mx = 0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(slots_new) * states; ++k) mx = std::max(mx, next[k]);
    if (mx > 0) {
      const double inv = 1.0 / mx;
      for (auto& v : next) v *= inv;
      log_scale += std::log(mx);
    }
    cur.swap(next);
    slots = slots_new;
    l_cur = l_new;
  }

  TransferResult r;
  r.window = window;
  r.resolved = resolve_magnetization;
  // bucket 0: M > 0, 1: M < 0, 2: M = 0
  std::vector<CompensatedSum> z(3);
  std::vector<std::vector<CompensatedSum>> sums(3, std::vector<CompensatedSum>(window.size()));
  for (int j = 0; j < slots; ++j) {
    const int m = resolve_magnetization ? -l_cur + 2 * j : 1;
    const int bucket = m > 0 ? 0 : (m < 0 ? 1 : 2);
    for (std::size_t s = 0; s < states; ++s) {
      z[bucket].add(cur[static_cast<std::size_t>(j) * states + s]);
      for (std::size_t c = 1; c < channels; ++c)
        sums[bucket][c - 1].add(cur[(c * slots + j) * states + s]);
    }
  }
  auto finish = [&](std::vector<int> buckets, double& log_z, std::vector<double>& ex) {
    double zz = 0;
    std::vector<double> ss(window.size(), 0.0);
    for (int bk : buckets) {
      zz += z[bk].value();
      for (std::size_t c = 0; c < window.size(); ++c) ss[c] += sums[bk][c].value();
    }
    log_z = zz > 0 ? std::log(zz) + log_scale : neg_inf;
    ex.assign(window.size(), 0.0);
    if (zz > 0)
      for (std::size_t c = 0; c < window.size(); ++c) ex[c] = std::clamp(ss[c] / zz, -1.0, 1.0);
  };
  finish({0, 1, 2}, r.log_z, r.expectations);
  if (resolve_magnetization) {
    finish({0}, r.log_z_pos, r.exp_pos);
    finish({1}, r.log_z_neg, r.exp_neg);
    finish({2}, r.log_z_zero, r.exp_zero);
  }
  return r;
}

inline TransferResult transfer_matrix(const Volume& vol, const Couplings& c, const BoundaryCondition& eta,
                                      const Window& window, bool resolve_magnetization) {
  return transfer_matrix(make_model(vol, c, eta), window, resolve_magnetization);
}

}  // namespace rbc

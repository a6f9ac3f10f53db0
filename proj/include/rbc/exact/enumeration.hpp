#pragma once

// Exhaustive enumeration over all 2^|Lambda| configurations. Configurations
// are words with bit i set when site i is +1.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "rbc/exact/contours.hpp"
#include "rbc/lattice.hpp"
#include "rbc/rng.hpp"
#include "rbc/stats.hpp"

namespace rbc {

inline constexpr std::size_t max_enumeration_sites = 25;

/// <sigma_a>, <sigma_a sigma_b>, or the constant 1 (used where a window pair
/// would leave the box).
struct Observable {
  enum class Kind : std::uint8_t { site, pair, unit };
  Kind kind = Kind::site;
  std::uint32_t a = 0;
  std::uint32_t b = 0;

  static Observable site(std::uint32_t i) { return {Kind::site, i, i}; }
  static Observable pair(std::uint32_t i, std::uint32_t j) { return {Kind::pair, i, j}; }
  static Observable unit() { return {Kind::unit, 0, 0}; }

  bool odd() const noexcept { return kind == Kind::site; }

  int value(std::uint64_t x) const noexcept {
    switch (kind) {
      case Kind::site: return (x >> a) & 1 ? 1 : -1;
      case Kind::pair: return ((x >> a) ^ (x >> b)) & 1 ? -1 : 1;
      case Kind::unit: return 1;
    }
    return 0;
  }
  int value(const SpinConfig& s) const {
    switch (kind) {
      case Kind::site: return s[a];
      case Kind::pair: return s[a] * s[b];
      case Kind::unit: return 1;
    }
    return 0;
  }
  bool operator==(const Observable&) const = default;
};

using Window = std::vector<Observable>;

/// Origin spin, then the origin paired with its +e_k neighbour for each axis.
inline Window canonical_window(const Volume& vol) {
  const auto o = vol.origin_site();
  Window w{Observable::site(o)};
  const auto x = vol.local(o);
  for (int k = 0; k < vol.dim(); ++k) {
    if (x[k] + 1 < vol.extent(k)) w.push_back(Observable::pair(o, o + vol.stride(k)));
    else w.push_back(Observable::unit());
  }
  return w;
}

inline Window origin_window(const Volume& vol) { return {Observable::site(vol.origin_site())}; }

struct WindowMarginal {
  Window window;
  std::vector<double> expectations;
};

/// Energies of words over up to 64 sites, evaluated as a fixed-order sum of
/// byte-table lookups (one table per 8-site chunk, one per chunk pair joined
/// by a bond). No incremental updates, so no drift over 2^n configurations.
class EnergyTable {
 public:
  EnergyTable(std::size_t n, std::span<const WeightedBond> bonds, std::span<const double> field) : n_(n) {
    if (n > 64) throw std::invalid_argument("energy table limited to 64 sites");
    if (field.size() != n) throw std::invalid_argument("field size mismatch");
    chunks_ = static_cast<int>((n + 7) / 8);
    single_.assign(static_cast<std::size_t>(chunks_), std::vector<double>(256, 0.0));
    std::map<std::pair<int, int>, std::vector<WeightedBond>> cross;
    std::vector<std::vector<WeightedBond>> inner(static_cast<std::size_t>(chunks_));
    for (const auto& b : bonds) {
      if (b.i >= n || b.j >= n) throw std::invalid_argument("bond outside the site range");
      int ca = static_cast<int>(b.i / 8), cb = static_cast<int>(b.j / 8);
      if (ca == cb) inner[ca].push_back(b);
      else cross[{std::min(ca, cb), std::max(ca, cb)}].push_back(b);
    }
    for (int c = 0; c < chunks_; ++c)
      for (unsigned byte = 0; byte < 256; ++byte) {
        const std::uint64_t x = static_cast<std::uint64_t>(byte) << (8 * c);
        double e = 0;
        for (const auto& b : inner[c]) e += b.coupling * spin(x, b.i) * spin(x, b.j);
        for (std::size_t i = 8 * c; i < std::min<std::size_t>(n, 8 * c + 8); ++i) e += field[i] * spin(x, i);
        single_[c][byte] = e;
      }
    for (const auto& [key, list] : cross) {
      Pair p{key.first, key.second, std::vector<double>(65536, 0.0)};
      for (unsigned idx = 0; idx < 65536; ++idx) {
        const std::uint64_t x = (static_cast<std::uint64_t>(idx & 255) << (8 * p.a)) |
                                (static_cast<std::uint64_t>(idx >> 8) << (8 * p.b));
        double e = 0;
        for (const auto& b : list) e += b.coupling * spin(x, b.i) * spin(x, b.j);
        p.table[idx] = e;
      }
      pairs_.push_back(std::move(p));
    }
  }

  std::size_t num_sites() const noexcept { return n_; }

  double operator()(std::uint64_t x) const noexcept {
    double e = 0;
    for (int c = 0; c < chunks_; ++c) e += single_[c][(x >> (8 * c)) & 255];
    for (const auto& p : pairs_) e += p.table[((x >> (8 * p.a)) & 255) | (((x >> (8 * p.b)) & 255) << 8)];
    return e;
  }

 private:
  static int spin(std::uint64_t x, std::size_t i) { return (x >> i) & 1 ? 1 : -1; }
  struct Pair {
    int a;
    int b;
    std::vector<double> table;
  };
  std::size_t n_;
  int chunks_ = 0;
  std::vector<std::vector<double>> single_;
  std::vector<Pair> pairs_;
};

/// log Z and window expectations for one ensemble.
struct EnsembleEstimate {
  double log_z = neg_inf;
  std::vector<double> expectations;
  /// Gibbs probability (within this ensemble) of the long-contour event, when requested.
  double long_contour_probability = 0.0;
};

struct EnumerationResult {
  Window window;
  EnsembleEstimate full;
  EnsembleEstimate plus;
  EnsembleEstimate minus;

  WindowMarginal marginal(EnsembleLabel l) const {
    return {window, l == EnsembleLabel::Plus ? plus.expectations : minus.expectations};
  }
  WindowMarginal full_marginal() const { return {window, full.expectations}; }
};

struct EnumerationOptions {
  /// When > 0, also report the weight of configurations whose longest
  /// contour has at least this many dual edges (2D only).
  int long_contour_threshold = 0;
};

namespace detail {

/// Accumulates weighted channel sums for the two ensembles and combines them.
struct EnsembleAccumulator {
  explicit EnsembleAccumulator(std::size_t channels)
      : z(2), sums(2, std::vector<CompensatedSum>(channels)), indicator(2) {}
  std::vector<CompensatedSum> z;
  std::vector<std::vector<CompensatedSum>> sums;
  std::vector<CompensatedSum> indicator;

  EnumerationResult finish(const Window& window, double shift) const {
    EnumerationResult r;
    r.window = window;
    const std::size_t m = window.size();
    double zf = 0, ind_f = 0;
    std::vector<double> sf(m, 0.0);
    for (int l = 0; l < 2; ++l) {
      auto& e = l == 0 ? r.plus : r.minus;
      const double zl = z[l].value();
      e.log_z = zl > 0 ? std::log(zl) + shift : neg_inf;
      e.expectations.assign(m, 0.0);
      for (std::size_t c = 0; c < m; ++c) {
        const double s = sums[l][c].value();
        e.expectations[c] = zl > 0 ? std::clamp(s / zl, -1.0, 1.0) : 0.0;
        sf[c] += s;
      }
      e.long_contour_probability = zl > 0 ? indicator[l].value() / zl : 0.0;
      zf += zl;
      ind_f += indicator[l].value();
    }
    r.full.log_z = std::log(zf) + shift;
    r.full.expectations.resize(m);
    for (std::size_t c = 0; c < m; ++c) r.full.expectations[c] = std::clamp(sf[c] / zf, -1.0, 1.0);
    r.full.long_contour_probability = ind_f / zf;
    return r;
  }
};

inline void check_window(const Window& w, std::size_t n) {
  for (const auto& o : w)
    if (o.kind != Observable::Kind::unit && (o.a >= n || o.b >= n))
      throw std::invalid_argument("window observable outside the volume");
}

}  // namespace detail

/// Full, plus and minus partition functions and window expectations.
inline EnumerationResult enumerate(const Model& model, const Window& window, const EnumerationOptions& opt = {}) {
  const std::size_t n = model.volume.num_sites();
  if (n > max_enumeration_sites) throw std::invalid_argument("volume too large for enumeration");
  if (opt.long_contour_threshold > 0 && model.volume.dim() != 2)
    throw std::invalid_argument("contour lengths are defined in two dimensions only");
  detail::check_window(window, n);
  const EnergyTable energy(n, model.bonds, model.field);
  const ContourClassifier classifier(model.volume);
  const std::uint64_t count = std::uint64_t{1} << n;

  double e_min = energy(0);
  for (std::uint64_t x = 1; x < count; ++x) e_min = std::min(e_min, energy(x));

  detail::EnsembleAccumulator acc(window.size());
  for (std::uint64_t x = 0; x < count; ++x) {
    const double w = std::exp(e_min - energy(x));
    const auto a = classifier.analyze(x);
    const int l = static_cast<int>(a.label);
    acc.z[l].add(w);
    for (std::size_t c = 0; c < window.size(); ++c) acc.sums[l][c].add(w * window[c].value(x));
    if (opt.long_contour_threshold > 0 && a.max_length >= opt.long_contour_threshold) acc.indicator[l].add(w);
  }
  return acc.finish(window, -e_min);
}

inline EnumerationResult enumerate(const Volume& vol, const Couplings& c, const BoundaryCondition& eta,
                                   const Window& window, const EnumerationOptions& opt = {}) {
  return enumerate(make_model(vol, c, eta), window, opt);
}

/// Enumeration for volumes with a uniform bulk coupling whose boundary enters
/// only through fields on the inner-boundary layer. Configurations are
/// aggregated once by (layer pattern, ensemble label, bulk bond sum) with
/// integer observable sums; each evaluation is then a pass over the table.
/// Global spin flip maps a layer pattern p to its complement with the label
/// flipped, so only patterns with the top layer bit clear are stored.
class EnsembleTable {
 public:
  EnsembleTable(const Volume& vol, Window window, const EnumerationOptions& opt = {})
      : vol_(vol), window_(std::move(window)), opt_(opt) {
    const std::size_t n = vol.num_sites();
    if (n > max_enumeration_sites) throw std::invalid_argument("volume too large for enumeration");
    if (opt.long_contour_threshold > 0 && vol.dim() != 2)
      throw std::invalid_argument("contour lengths are defined in two dimensions only");
    detail::check_window(window_, n);

    std::uint64_t layer_mask = 0;
    for (const auto& b : vol.boundary_bonds()) layer_mask |= std::uint64_t{1} << b.site;
    for (std::uint32_t i = 0; i < n; ++i) ((layer_mask >> i) & 1 ? layer_ : interior_).push_back(i);
    nbonds_ = static_cast<int>(vol.bulk_bonds().size());
    channels_ = window_.size() + 1;

    std::map<std::uint32_t, std::uint64_t> by_shift;
    for (const auto& b : vol.bulk_bonds()) by_shift[b.j - b.i] |= std::uint64_t{1} << b.i;
    std::vector<std::pair<std::uint32_t, std::uint64_t>> shifts(by_shift.begin(), by_shift.end());

    const int nl = static_cast<int>(layer_.size()), ni = static_cast<int>(interior_.size());
    std::vector<std::uint64_t> layer_word(std::size_t{1} << nl), interior_word(std::size_t{1} << ni);
    for (std::size_t p = 1; p < layer_word.size(); ++p)
      layer_word[p] = layer_word[p & (p - 1)] | (std::uint64_t{1} << layer_[std::countr_zero(p)]);
    for (std::size_t q = 1; q < interior_word.size(); ++q)
      interior_word[q] = interior_word[q & (q - 1)] | (std::uint64_t{1} << interior_[std::countr_zero(q)]);

    const ContourClassifier classifier(vol);
    const std::size_t half = layer_word.size() / 2;
    const std::size_t cells = 2 * static_cast<std::size_t>(nbonds_ + 1);
    std::vector<std::int64_t> cnt(cells), obs(cells * channels_);
    offsets_.reserve(half + 1);
    offsets_.push_back(0);
    for (std::size_t p = 0; p < half; ++p) {
      std::fill(cnt.begin(), cnt.end(), 0);
      std::fill(obs.begin(), obs.end(), 0);
      for (std::size_t q = 0; q < interior_word.size(); ++q) {
        const std::uint64_t x = layer_word[p] | interior_word[q];
        int disagree = 0;
        for (const auto& [s, m] : shifts) disagree += std::popcount((x ^ (x >> s)) & m);
        const auto a = classifier.analyze(x);
        const std::size_t cell = static_cast<std::size_t>(a.label) * (nbonds_ + 1) + disagree;
        ++cnt[cell];
        std::int64_t* o = &obs[cell * channels_];
        for (std::size_t c = 0; c < window_.size(); ++c) o[c] += window_[c].value(x);
        if (opt_.long_contour_threshold > 0 && a.max_length >= opt_.long_contour_threshold) ++o[window_.size()];
      }
      for (std::size_t cell = 0; cell < cells; ++cell) {
        if (!cnt[cell]) continue;
        label_.push_back(static_cast<std::uint8_t>(cell / (nbonds_ + 1)));
        disagree_.push_back(static_cast<std::uint16_t>(cell % (nbonds_ + 1)));
        count_.push_back(cnt[cell]);
        obs_.insert(obs_.end(), obs.begin() + cell * channels_, obs.begin() + (cell + 1) * channels_);
      }
      offsets_.push_back(label_.size());
    }
  }

  const Volume& volume() const noexcept { return vol_; }
  const Window& window() const noexcept { return window_; }
  std::size_t entries() const noexcept { return label_.size(); }

  /// `field` is the per-site field (zero off the layer), `j` the bulk coupling.
  EnumerationResult evaluate(double j, std::span<const double> field) const {
    if (field.size() != vol_.num_sites()) throw std::invalid_argument("field size mismatch");
    for (auto i : interior_)
      if (field[i] != 0.0) throw std::invalid_argument("ensemble table needs fields on the boundary layer only");
    const int nl = static_cast<int>(layer_.size());
    const std::size_t np = std::size_t{1} << nl;

    // Layer field energy in a fixed site order, so that complementary
    // patterns get exactly opposite energies.
    std::vector<double> eb(np);
    double e_lo = 0;
    for (std::size_t p = 0; p < np; ++p) {
      double e = 0;
      for (int k = 0; k < nl; ++k) e += (p >> k) & 1 ? field[layer_[k]] : -field[layer_[k]];
      eb[p] = e;
      e_lo = p ? std::min(e_lo, e) : e;
    }
    std::vector<double> pw(np);
    for (std::size_t p = 0; p < np; ++p) pw[p] = std::exp(e_lo - eb[p]);
    // Bulk energy j * (nbonds - 2 d) for d disagreeing bonds.
    double b_lo = 0;
    std::vector<double> bulk(nbonds_ + 1);
    for (int d = 0; d <= nbonds_; ++d) {
      bulk[d] = j * (nbonds_ - 2 * d);
      b_lo = d ? std::min(b_lo, bulk[d]) : bulk[d];
    }
    std::vector<double> bw(nbonds_ + 1);
    for (int d = 0; d <= nbonds_; ++d) bw[d] = std::exp(b_lo - bulk[d]);

    const std::size_t m = window_.size();
    std::vector<int> parity(channels_, 1);
    for (std::size_t c = 0; c < m; ++c) parity[c] = window_[c].odd() ? -1 : 1;

    detail::EnsembleAccumulator acc(m);
    for (std::size_t p = 0; p + 1 < offsets_.size(); ++p) {
      const std::size_t pbar = (np - 1) ^ p;
      for (std::size_t e = offsets_[p]; e < offsets_[p + 1]; ++e) {
        const int l = label_[e];
        const std::int64_t* o = &obs_[e * channels_];
        const double w = bw[disagree_[e]] * pw[p];
        const double wbar = bw[disagree_[e]] * pw[pbar];
        acc.z[l].add(w * static_cast<double>(count_[e]));
        acc.z[1 - l].add(wbar * static_cast<double>(count_[e]));
        for (std::size_t c = 0; c < m; ++c) {
          acc.sums[l][c].add(w * static_cast<double>(o[c]));
          acc.sums[1 - l][c].add(wbar * static_cast<double>(parity[c] * o[c]));
        }
        if (o[m]) {
          acc.indicator[l].add(w * static_cast<double>(o[m]));
          acc.indicator[1 - l].add(wbar * static_cast<double>(o[m]));
        }
      }
    }
    return acc.finish(window_, -(e_lo + b_lo));
  }

  EnumerationResult evaluate(const Couplings& c, const BoundaryCondition& eta) const {
    if (eta.kind == BoundaryKind::periodic) throw std::invalid_argument("ensemble table does not support periodic boundaries");
    return evaluate(c.j, make_model(vol_, c, eta).field);
  }

 private:
  Volume vol_;
  Window window_;
  EnumerationOptions opt_;
  std::vector<std::uint32_t> layer_;
  std::vector<std::uint32_t> interior_;
  int nbonds_ = 0;
  std::size_t channels_ = 1;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint8_t> label_;
  std::vector<std::uint16_t> disagree_;
  std::vector<std::int64_t> count_;
  std::vector<std::int64_t> obs_;
};

/// log Z of a two-dimensional box by enumerating the lower and upper halves
/// separately (each up to 24 sites) and joining them over the rows on either
/// side of the cut. Falls back to plain enumeration for small volumes.
inline double log_partition_function(const Model& model) {
  const auto& vol = model.volume;
  const std::size_t n = vol.num_sites();
  if (n <= max_enumeration_sites) return enumerate(model, {}).full.log_z;
  if (vol.dim() != 2) throw std::invalid_argument("split enumeration needs a two-dimensional box");
  const int w = vol.extent(0), h = vol.extent(1);
  const int r = h / 2;
  const std::uint32_t cut = static_cast<std::uint32_t>(w * r);
  const std::size_t n_lo = cut, n_hi = n - cut;
  if (n_lo > 24 || n_hi > 24 || w > 12) throw std::invalid_argument("volume too large for split enumeration");

  std::vector<WeightedBond> lo, hi, cross;
  for (const auto& b : model.bonds) {
    const auto i = std::min(b.i, b.j), j = std::max(b.i, b.j);
    if (j < cut) lo.push_back({i, j, b.coupling});
    else if (i >= cut) hi.push_back({i - cut, j - cut, b.coupling});
    else if (j - i == static_cast<std::uint32_t>(w) && i >= cut - w) cross.push_back({i - (cut - w), j - cut, b.coupling});
    else throw std::invalid_argument("split enumeration needs nearest-neighbour bonds");
  }

  // Half sums keyed by the row that touches the cut.
  auto half = [&](std::size_t m, const std::vector<WeightedBond>& bonds, std::span<const double> field,
                  int key_shift, std::vector<double>& z) {
    const EnergyTable energy(m, bonds, field);
    const std::uint64_t count = std::uint64_t{1} << m;
    double e_min = energy(0);
    for (std::uint64_t x = 1; x < count; ++x) e_min = std::min(e_min, energy(x));
    std::vector<CompensatedSum> acc(std::size_t{1} << w);
    const std::uint64_t key_mask = (std::uint64_t{1} << w) - 1;
    for (std::uint64_t x = 0; x < count; ++x) acc[(x >> key_shift) & key_mask].add(std::exp(e_min - energy(x)));
    z.resize(acc.size());
    for (std::size_t k = 0; k < acc.size(); ++k) z[k] = std::log(acc[k].value()) - e_min;
  };
  std::vector<double> z_lo, z_hi;
  half(n_lo, lo, std::span<const double>(model.field).subspan(0, n_lo), w * (r - 1), z_lo);
  half(n_hi, hi, std::span<const double>(model.field).subspan(n_lo), 0, z_hi);

  std::vector<double> terms;
  terms.reserve(z_lo.size() * z_hi.size());
  for (std::size_t a = 0; a < z_lo.size(); ++a)
    for (std::size_t b = 0; b < z_hi.size(); ++b) {
      double e = 0;
      for (const auto& c : cross) e += c.coupling * ((a >> c.i) & 1 ? 1 : -1) * ((b >> c.j) & 1 ? 1 : -1);
      terms.push_back(z_lo[a] + z_hi[b] - e);
    }
  return log_sum_exp(terms);
}

/// Draws independent configurations from the exact Gibbs distribution.
class ExactSampler {
 public:
  explicit ExactSampler(const Model& model) : n_(model.volume.num_sites()) {
    if (n_ > 20) throw std::invalid_argument("exact sampler limited to 20 sites");
    const EnergyTable energy(n_, model.bonds, model.field);
    const std::uint64_t count = std::uint64_t{1} << n_;
    double e_min = energy(0);
    for (std::uint64_t x = 1; x < count; ++x) e_min = std::min(e_min, energy(x));
    cdf_.resize(count);
    double s = 0;
    for (std::uint64_t x = 0; x < count; ++x) cdf_[x] = (s += std::exp(e_min - energy(x)));
    for (auto& c : cdf_) c /= s;
  }

  std::uint64_t sample_word(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }
  SpinConfig sample(Rng& rng) const { return SpinConfig::from_word(sample_word(rng), n_); }
  double probability(std::uint64_t x) const { return cdf_[x] - (x ? cdf_[x - 1] : 0.0); }

 private:
  std::size_t n_;
  std::vector<double> cdf_;
};

}  // namespace rbc

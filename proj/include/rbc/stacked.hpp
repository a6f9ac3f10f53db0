#pragma once

// Stacks of two-dimensional planes with independent random boundaries, a
// random line of bonds through each plane's origin, and optional weak
// vertical couplings; ground-state census, replica overlaps, and the gauge
// map onto a Mattis model.
//
// Geometry of one N x N plane (N >= 2): columns x < 0 form the left half,
// x >= 0 the right half, so the origin is on the right. The line bonds join
// columns -1 and 0, one per row. Candidate ground states are uniform on each
// half: index 0..3 = (++, +-, -+, --) as (left, right).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rbc/exact/enumeration.hpp"
#include "rbc/experiment/seed.hpp"
#include "rbc/groundstate.hpp"
#include "rbc/lattice.hpp"
#include "rbc/parallel.hpp"
#include "rbc/rng.hpp"
#include "rbc/stats.hpp"

namespace rbc {

constexpr std::array<std::array<int, 2>, 4> plane_candidates{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

struct StackedModel {
  int planes = 1;  // K
  int size = 2;    // N
  Couplings couplings;
  /// Random-sign line bonds through each origin column; without it a plane
  /// is the plain ferromagnet and only (++) and (--) compete.
  bool line_disorder = true;
  /// Magnitude of the random-sign bonds joining the origins of adjacent planes.
  double vertical_coupling = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (planes < 1) throw std::invalid_argument("need at least one plane");
    if (size < 2) throw std::invalid_argument("plane size must be >= 2");
    if (vertical_coupling < 0) throw std::invalid_argument("vertical coupling magnitude must be >= 0");
  }
  std::uint64_t boundary_seed(int p) const { return derive_seed(seed, {"plane", p, "eta"}); }
  std::uint64_t line_seed(int p) const { return derive_seed(seed, {"plane", p, "line"}); }
  std::uint64_t vertical_seed() const { return derive_seed(seed, {"vertical"}); }
  int candidate_count() const { return line_disorder ? 4 : 2; }
};

/// Sign of the line bond in row y (absolute coordinate) of a plane.
inline int line_sign(std::uint64_t line_seed, std::int64_t y) { return sign_at(line_seed, Coord{0, y, 0}); }

struct PlaneEnergetics {
  long boundary_left = 0;   // sum of eta over boundary bonds of the left half
  long boundary_right = 0;
  long line_sum = 0;        // sum of line-bond signs
  std::array<double, 4> energy{};
  int candidates = 4;
  /// Candidate indices in increasing energy, ties in index order.
  std::array<int, 4> order{0, 1, 2, 3};

  double gap() const { return energy[order[1]] - energy[order[0]]; }
  int leading() const { return order[0]; }
  std::vector<int> argmin() const {
    std::vector<int> out;
    for (int k = 0; k < candidates; ++k)
      if (energy[order[k]] == energy[order[0]]) out.push_back(order[k]);
    return out;
  }
};

namespace detail {
inline void rank_candidates(PlaneEnergetics& pe) {
  std::stable_sort(pe.order.begin(), pe.order.begin() + pe.candidates,
                   [&](int a, int b) { return pe.energy[a] < pe.energy[b]; });
}
}  // namespace detail

/// Candidate energies from the half-boundary sums and the line sum:
/// E(a, b) = J' (a S_L + b S_R) + J a b sum_y xi_y. Bulk bonds inside each
/// half are satisfied by every candidate and are dropped.
inline PlaneEnergetics plane_energetics(long s_left, long s_right, long line_sum, const Couplings& c, bool line_disorder) {
  PlaneEnergetics pe;
  pe.boundary_left = s_left;
  pe.boundary_right = s_right;
  pe.line_sum = line_sum;
  if (line_disorder) {
    for (int k = 0; k < 4; ++k) {
      const auto [a, b] = plane_candidates[k];
      pe.energy[k] = c.j_prime * static_cast<double>(a * s_left + b * s_right) + c.j * static_cast<double>(a * b * line_sum);
    }
  } else {
    // (++) at slot 0, (--) at slot 1; the uniform states differ only through
    // the boundary term.
    const double h = c.j_prime * static_cast<double>(s_left + s_right);
    pe.candidates = 2;
    pe.energy = {h, -h, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  detail::rank_candidates(pe);
  return pe;
}

/// Half-uniform configuration for candidate index k in mode `line_disorder`.
inline std::array<int, 2> candidate_spins(int k, bool line_disorder) {
  if (!line_disorder) return k == 0 ? std::array<int, 2>{1, 1} : std::array<int, 2>{-1, -1};
  return plane_candidates[static_cast<std::size_t>(k)];
}

/// Exact energetics of plane p, walking only the boundary shell and line.
inline PlaneEnergetics plane_ground_states(const StackedModel& m, int p) {
  m.validate();
  const int n = m.size;
  std::vector<int> extent{n, n};
  std::vector<std::int64_t> lower{centered_lower(n), centered_lower(n)};
  const CoordHasher eta(m.boundary_seed(p));
  long left = 0, right = 0;
  for_each_boundary_bond(extent, lower, [&](std::uint32_t site, const Coord& out) {
    const std::int64_t x = lower[0] + static_cast<std::int64_t>(site % static_cast<std::uint32_t>(n));
    (x < 0 ? left : right) += eta.sign(out);
  });
  long line = 0;
  if (m.line_disorder) {
    const auto ls = m.line_seed(p);
    for (int y = 0; y < n; ++y) line += line_sign(ls, lower[1] + y);
  }
  return plane_energetics(left, right, line, m.couplings, m.line_disorder);
}

/// Plane p as a solver Model (bulk, line, and boundary terms), for
/// enumeration-scale checks of the candidate restriction.
inline Model plane_model(const StackedModel& m, int p) {
  m.validate();
  const auto vol = build_volume(2, m.size);
  const auto bc = sample_boundary(vol, BoundaryKind::symmetric_iid, m.boundary_seed(p));
  Model model = make_model(vol, m.couplings, bc);
  if (m.line_disorder) {
    const auto ls = m.line_seed(p);
    for (auto& b : model.bonds) {
      const auto ci = vol.coord(b.i), cj = vol.coord(b.j);
      if (ci[1] == cj[1] && ci[0] == -1 && cj[0] == 0) b.coupling *= line_sign(ls, ci[1]);
    }
  }
  return model;
}

inline SpinConfig candidate_configuration(const Volume& vol, int k, bool line_disorder) {
  const auto s = candidate_spins(k, line_disorder);
  SpinConfig c(vol.num_sites());
  for (std::uint32_t i = 0; i < vol.num_sites(); ++i) c.set(i, vol.coord(i)[0] < 0 ? s[0] : s[1]);
  return c;
}

/// Mixed iff the leading candidate's weight 1/(1 + e^{-gap}) lies in
/// [delta, 1 - delta], i.e. the same rule as a single ground state with
/// H+ = -gap/2.
inline bool is_mixture(double gap, double delta) {
  return classify_probability(selection_prob(-0.5 * gap).p_plus, delta) == Classification::Mixed;
}

struct PlaneState {
  int leading = 0;
  int second = 1;
  double gap = 0.0;
};

/// Per-plane leading candidate, runner-up, and gap for a whole stack. With
/// vertical couplings the gap is the min-marginal gap of the chain (cost of
/// forcing the plane off its optimal candidate).
inline std::vector<PlaneState> stack_ground_state(const StackedModel& m, int workers = 1) {
  m.validate();
  const int K = m.planes;
  std::vector<PlaneEnergetics> pe(static_cast<std::size_t>(K));
  parallel_for(static_cast<std::size_t>(K), workers, [&](std::size_t p) { pe[p] = plane_ground_states(m, static_cast<int>(p)); });
  std::vector<PlaneState> out(static_cast<std::size_t>(K));
  if (m.vertical_coupling == 0.0 || K == 1) {
    for (int p = 0; p < K; ++p) out[p] = {pe[p].order[0], pe[p].order[1], pe[p].gap()};
    return out;
  }
  // Min-sum over the chain; adjacent planes interact through their origin
  // spins (right half) with coupling v_p = vertical * (+-1).
  const int C = m.candidate_count();
  const CoordHasher vs(m.vertical_seed());
  std::vector<double> v(static_cast<std::size_t>(K - 1));
  for (int p = 0; p + 1 < K; ++p) v[p] = m.vertical_coupling * vs.sign(Coord{p, 0, 0});
  auto pair_e = [&](int p, int s, int t) {
    return v[p] * candidate_spins(s, m.line_disorder)[1] * candidate_spins(t, m.line_disorder)[1];
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::array<double, 4>> fwd(static_cast<std::size_t>(K)), bwd(static_cast<std::size_t>(K));
  for (int s = 0; s < C; ++s) fwd[0][s] = pe[0].energy[s];
  for (int p = 1; p < K; ++p)
    for (int t = 0; t < C; ++t) {
      double best = inf;
      for (int s = 0; s < C; ++s) best = std::min(best, fwd[p - 1][s] + pair_e(p - 1, s, t));
      fwd[p][t] = best + pe[p].energy[t];
    }
  for (int s = 0; s < C; ++s) bwd[K - 1][s] = 0.0;
  for (int p = K - 2; p >= 0; --p)
    for (int s = 0; s < C; ++s) {
      double best = inf;
      for (int t = 0; t < C; ++t) best = std::min(best, bwd[p + 1][t] + pair_e(p, s, t) + pe[p + 1].energy[t]);
      bwd[p][s] = best;
    }
  for (int p = 0; p < K; ++p) {
    PlaneEnergetics mm;
    mm.candidates = C;
    for (int s = 0; s < 4; ++s) mm.energy[s] = s < C ? fwd[p][s] + bwd[p][s] : inf;
    detail::rank_candidates(mm);
    out[p] = {mm.order[0], mm.order[1], mm.gap()};
  }
  return out;
}

inline int mixture_count(const std::vector<PlaneState>& planes, double delta) {
  int k = 0;
  for (const auto& p : planes) k += is_mixture(p.gap, delta);
  return k;
}

struct CensusParams {
  std::vector<int> sizes{64, 256, 1024};
  /// Planes per stack; 0 means K = N.
  int planes = 0;
  std::vector<double> deltas{0.1, 0.25, 0.4};
  int realizations = 200;
  Couplings couplings;
  bool line_disorder = true;
  double vertical_coupling = 0.0;
  std::uint64_t master_seed = 1;
  int workers = 1;
};

struct CensusRow {
  int size;
  int planes;
  double delta;
  double mean_count;
  Interval count_ci;
  double mean_fraction;
  Interval fraction_ci;
};

/// Disorder realization r of the stack at plane size n.
inline std::uint64_t stack_seed(std::uint64_t master, int n, std::size_t r) { return derive_seed(master, {"stacked", n, r}); }

/// Mean count with a normal 95% interval over realizations.
inline CensusRow census_row(int n, int planes, double delta, const std::vector<double>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("need at least two realizations");
  const double mu = mean(counts);
  const double half = 1.96 * std::sqrt(variance(counts) / static_cast<double>(counts.size()));
  return {n, planes, delta, mu, {mu - half, mu + half}, mu / planes, {(mu - half) / planes, (mu + half) / planes}};
}

inline StackedModel census_model(const CensusParams& p, int n, int r) {
  return {p.planes > 0 ? p.planes : n, n, p.couplings, p.line_disorder, p.vertical_coupling, stack_seed(p.master_seed, n, r)};
}

inline std::vector<CensusRow> mixture_census(const CensusParams& p) {
  if (p.realizations < 2) throw std::invalid_argument("need at least two realizations");
  std::vector<CensusRow> rows;
  for (int n : p.sizes) {
    const int K = p.planes > 0 ? p.planes : n;
    std::vector<std::vector<double>> counts(p.deltas.size(), std::vector<double>(static_cast<std::size_t>(p.realizations)));
    parallel_for(static_cast<std::size_t>(p.realizations), p.workers, [&](std::size_t r) {
      const auto planes = stack_ground_state(census_model(p, n, static_cast<int>(r)));
      for (std::size_t d = 0; d < p.deltas.size(); ++d) counts[d][r] = mixture_count(planes, p.deltas[d]);
    });
    for (std::size_t d = 0; d < p.deltas.size(); ++d) rows.push_back(census_row(n, K, p.deltas[d], counts[d]));
  }
  return rows;
}

struct OverlapParams {
  int size = 64;
  int planes = 0;  // 0 means K = N
  double delta = 0.25;
  int realizations = 200;
  int pairs = 100;  // replica pairs per realization
  int bins = 40;
  Couplings couplings;
  bool line_disorder = true;
  std::uint64_t master_seed = 1;
  int workers = 1;
};

struct OverlapResult {
  int size = 0;
  int planes = 0;
  double delta = 0.0;
  double mean_q = 0.0;
  double stderr_q = 0.0;
  /// Normalized histogram over [-1, 1], averaged over realizations.
  std::vector<double> histogram;
};

/// Site overlap of two half-uniform plane configurations.
inline double candidate_overlap(int a, int b, int n, bool line_disorder) {
  const auto s = candidate_spins(a, line_disorder), t = candidate_spins(b, line_disorder);
  const double left = static_cast<double>(n / 2) / n;
  return left * s[0] * t[0] + (1.0 - left) * s[1] * t[1];
}

/// Overlaps of `pairs` replica pairs at fixed disorder. Each replica picks,
/// independently in each plane, the leading candidate of a pure plane, and in
/// a mixed plane the leading candidate with probability 1/(1 + e^{-gap}) or
/// else the runner-up. The uniforms drawn do not depend on delta, so
/// overlaps for different delta are coupled draw by draw.
inline std::vector<double> replica_overlaps(const std::vector<PlaneState>& planes, double delta, int pairs, int n,
                                            bool line_disorder, Rng& rng) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(pairs));
  for (int t = 0; t < pairs; ++t) {
    CompensatedSum q;
    for (const auto& pl : planes) {
      const double lead = selection_prob(-0.5 * pl.gap).p_plus;
      const double u1 = uniform01(rng), u2 = uniform01(rng);
      if (!is_mixture(pl.gap, delta)) {
        q.add(1.0);
        continue;
      }
      const int c1 = u1 < lead ? pl.leading : pl.second;
      const int c2 = u2 < lead ? pl.leading : pl.second;
      q.add(candidate_overlap(c1, c2, n, line_disorder));
    }
    out.push_back(q.value() / static_cast<double>(planes.size()));
  }
  return out;
}

/// Disorder average of per-realization mean overlaps and histograms.
inline OverlapResult overlap_result(int n, int planes, double delta, const std::vector<double>& per_real,
                                    const std::vector<std::vector<double>>& hist) {
  if (per_real.size() < 2 || hist.size() != per_real.size()) throw std::invalid_argument("need at least two realizations");
  const double r = static_cast<double>(per_real.size());
  OverlapResult out{n, planes, delta, mean(per_real), std::sqrt(variance(per_real) / r), std::vector<double>(hist[0].size())};
  for (const auto& h : hist)
    for (std::size_t b = 0; b < h.size(); ++b) out.histogram[b] += h[b] / r;
  return out;
}

inline void add_to_histogram(std::vector<double>& hist, double q, double weight) {
  const int bins = static_cast<int>(hist.size());
  const int bin = std::clamp(static_cast<int>((q + 1.0) / 2.0 * bins), 0, bins - 1);
  hist[static_cast<std::size_t>(bin)] += weight;
}

inline std::uint64_t overlap_seed(std::uint64_t master, int n, std::size_t r) { return derive_seed(master, {"overlap", n, r}); }

inline OverlapResult overlap_distribution(const OverlapParams& p) {
  if (p.realizations < 2 || p.pairs < 1 || p.bins < 1) throw std::invalid_argument("bad overlap parameters");
  const int n = p.size, K = p.planes > 0 ? p.planes : n;
  std::vector<double> per_real(static_cast<std::size_t>(p.realizations));
  std::vector<std::vector<double>> hist(static_cast<std::size_t>(p.realizations), std::vector<double>(static_cast<std::size_t>(p.bins)));
  parallel_for(static_cast<std::size_t>(p.realizations), p.workers, [&](std::size_t r) {
    const StackedModel m{K, n, p.couplings, p.line_disorder, 0.0, stack_seed(p.master_seed, n, r)};
    Rng rng(overlap_seed(p.master_seed, n, r));
    const auto qs = replica_overlaps(stack_ground_state(m), p.delta, p.pairs, n, p.line_disorder, rng);
    for (double qv : qs) add_to_histogram(hist[r], qv, 1.0 / p.pairs);
    per_real[r] = mean(qs);
  });
  return overlap_result(n, K, p.delta, per_real, hist);
}

/// tau over the box (one entry per site) and over the boundary shell.
struct GaugeField {
  std::vector<std::int8_t> inner;
  std::vector<std::int8_t> shell;
};

inline GaugeField random_gauge(const Volume& vol, std::uint64_t seed) {
  GaugeField g;
  Rng rng(seed);
  for (std::size_t i = 0; i < vol.num_sites(); ++i) g.inner.push_back(static_cast<std::int8_t>(random_sign(rng)));
  for (std::size_t k = 0; k < vol.boundary_sites().size(); ++k) g.shell.push_back(static_cast<std::int8_t>(random_sign(rng)));
  return g;
}

inline GaugeField uniform_gauge(const Volume& vol, int s) {
  return {std::vector<std::int8_t>(vol.num_sites(), static_cast<std::int8_t>(s)),
          std::vector<std::int8_t>(vol.boundary_sites().size(), static_cast<std::int8_t>(s))};
}

/// Nearest-neighbour model with per-bond couplings and fixed boundary spins:
/// H = sum_bulk J_ij s_i s_j + sum_boundary J'_ij s_i eta_j.
struct BondModel {
  Volume volume;
  std::vector<double> bulk;      // parallel to volume.bulk_bonds()
  std::vector<double> boundary;  // parallel to volume.boundary_bonds()
  std::vector<std::int8_t> boundary_values;

  Model to_model() const {
    Model m{volume, {}, std::vector<double>(volume.num_sites(), 0.0)};
    const auto bb = volume.bulk_bonds();
    for (std::size_t k = 0; k < bb.size(); ++k) m.bonds.push_back({bb[k].i, bb[k].j, bulk[k]});
    const auto sb = volume.boundary_bonds();
    for (std::size_t k = 0; k < sb.size(); ++k) m.field[sb[k].site] += boundary[k] * boundary_values[sb[k].shell];
    return m;
  }
  bool operator==(const BondModel& o) const {
    return volume == o.volume && bulk == o.bulk && boundary == o.boundary && boundary_values == o.boundary_values;
  }
};

inline BondModel ferromagnet(const Volume& vol, const Couplings& c, const BoundaryCondition& eta) {
  if (!eta.has_values() || eta.values.size() != vol.boundary_sites().size())
    throw std::invalid_argument("gauge map needs fixed boundary values");
  return {vol, std::vector<double>(vol.bulk_bonds().size(), c.j), std::vector<double>(vol.boundary_bonds().size(), c.j_prime),
          eta.values};
}

/// s_i -> tau_i s_i: couplings J tau_i tau_j, boundary spins eta_j tau_j.
inline BondModel gauge_transform(const BondModel& m, const GaugeField& g) {
  if (g.inner.size() != m.volume.num_sites() || g.shell.size() != m.volume.boundary_sites().size())
    throw std::invalid_argument("gauge field does not match the volume");
  BondModel out = m;
  const auto bb = m.volume.bulk_bonds();
  for (std::size_t k = 0; k < bb.size(); ++k) out.bulk[k] *= g.inner[bb[k].i] * g.inner[bb[k].j];
  const auto sb = m.volume.boundary_bonds();
  for (std::size_t k = 0; k < sb.size(); ++k) {
    out.boundary[k] *= g.inner[sb[k].site] * g.shell[sb[k].shell];
    out.boundary_values[sb[k].shell] = static_cast<std::int8_t>(m.boundary_values[sb[k].shell] * g.shell[sb[k].shell]);
  }
  return out;
}

inline int gauge_factor(const Observable& o, const GaugeField& g) {
  switch (o.kind) {
    case Observable::Kind::site: return g.inner[o.a];
    case Observable::Kind::pair: return g.inner[o.a] * g.inner[o.b];
    case Observable::Kind::unit: return 1;
  }
  return 1;
}

/// Every site plus the canonical pairs.
inline Window gauge_window(const Volume& vol) {
  Window w;
  for (std::uint32_t i = 0; i < vol.num_sites(); ++i) w.push_back(Observable::site(i));
  for (const auto& o : canonical_window(vol))
    if (o.kind == Observable::Kind::pair) w.push_back(o);
  return w;
}

/// max over the window of |<O>_Mattis - tau(O) <O>_ferro|, both models
/// enumerated exactly.
inline double gauge_check(const Volume& vol, const Couplings& c, const BoundaryCondition& eta, const GaugeField& g) {
  const auto window = gauge_window(vol);
  const auto ferro = ferromagnet(vol, c, eta);
  const auto f = enumerate(ferro.to_model(), window).full.expectations;
  const auto mt = enumerate(gauge_transform(ferro, g).to_model(), window).full.expectations;
  double dev = 0;
  for (std::size_t k = 0; k < window.size(); ++k) dev = std::max(dev, std::abs(mt[k] - gauge_factor(window[k], g) * f[k]));
  return dev;
}

}  // namespace rbc

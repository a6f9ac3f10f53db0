#pragma once

// Zero-temperature bulk (-J = infinity) with finite boundary coupling J'.
// Only the two uniform configurations survive, so everything reduces to the
// boundary energy H(+, eta) = J' * sum_{shell} eta_j, a sum of 2-valued
// variables whose size grows like N^{d-1}.

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "rbc/fit.hpp"
#include "rbc/lattice.hpp"

namespace rbc {

enum class Classification { Plus, Minus, Mixed };

inline std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::Plus: return "plus";
    case Classification::Minus: return "minus";
    case Classification::Mixed: return "mixed";
  }
  return "?";
}

struct SelectionProbabilities {
  double p_plus;
  double p_minus;
};

struct GroundStateOutcome {
  double h_plus = 0.0;
  double p_plus = 0.5;
  double p_minus = 0.5;
  Classification classification = Classification::Mixed;
};

inline double boundary_energy(const Volume& vol, double j_prime, const BoundaryCondition& eta) {
  if (!eta.has_values()) return 0.0;
  if (eta.values.size() != vol.boundary_sites().size())
    throw std::invalid_argument("boundary condition does not cover the boundary shell");
  return j_prime * static_cast<double>(eta.sum());
}

/// mu(+) = 1 / (1 + exp(2 H+)), mu(-) = 1 / (1 + exp(-2 H+)). Both are
/// evaluated from the same formula so that H -> -H swaps them bit-exactly.
inline SelectionProbabilities selection_prob(double h_plus) {
  return {1.0 / (1.0 + std::exp(2.0 * h_plus)), 1.0 / (1.0 + std::exp(-2.0 * h_plus))};
}

/// Mixed iff p_plus lies in [delta, 1 - delta].
inline Classification classify_probability(double p_plus, double delta) {
  if (p_plus >= delta && p_plus <= 1.0 - delta) return Classification::Mixed;
  return p_plus > 0.5 ? Classification::Plus : Classification::Minus;
}

/// Largest |H+| still classified as mixed: 1/2 ln((1 - delta)/delta).
inline double mixture_energy_window(double delta) { return 0.5 * std::log((1.0 - delta) / delta); }

inline GroundStateOutcome ground_state_outcome(double h_plus, double delta) {
  const auto p = selection_prob(h_plus);
  return {h_plus, p.p_plus, p.p_minus, classify_probability(p.p_plus, delta)};
}

inline std::uint64_t shell_size(int dim, std::uint64_t n) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
  if (n < 1) throw std::invalid_argument("linear size must be >= 1");
  std::uint64_t face = 1;
  for (int k = 1; k < dim; ++k) face *= n;
  return 2ULL * static_cast<std::uint64_t>(dim) * face;
}

/// sum of eta over the boundary shell of the centred cube of size n, with eta
/// the infinite i.i.d. field keyed by `seed`. Walks only the shell.
inline long shell_sum(std::uint64_t seed, int dim, int n) {
  std::vector<int> extent(static_cast<std::size_t>(dim), n);
  std::vector<std::int64_t> lower(static_cast<std::size_t>(dim), centered_lower(n));
  const CoordHasher eta(seed);
  long s = 0;
  for_each_boundary_bond(extent, lower, [&](std::uint32_t, const Coord& c) { s += eta.sign(c); });
  return s;
}

/// Exact Prob(|H+| <= window) for i.i.d. fair boundary values:
///   sum_{k : |B - 2k| |J'| <= window} C(B, k) / 2^B,  B = 2 d N^{d-1},
/// summed in arbitrary-precision integers and converted once at the end.
inline double tie_probability_exact(int dim, std::uint64_t n, double j_prime, double window) {
  if (window < 0) throw std::invalid_argument("window must be >= 0");
  const std::uint64_t b = shell_size(dim, n);
  const double a = std::abs(j_prime);
  if (a == 0.0) return 1.0;
  if (window / a >= static_cast<double>(b)) return 1.0;

  // Largest t with t == B (mod 2) and t |J'| <= window.
  std::uint64_t t = static_cast<std::uint64_t>(std::floor(window / a));
  while (t > 0 && static_cast<double>(t) * a > window) --t;
  while (static_cast<double>(t + 1) * a <= window) ++t;
  if ((t & 1ULL) != (b & 1ULL)) {
    if (t == 0) return 0.0;
    --t;
  }
  if (t >= b) return 1.0;

  const std::uint64_t k_lo = (b - t) / 2;
  const std::uint64_t k_hi = (b + t) / 2;
  mpz_class term;
  mpz_bin_uiui(term.get_mpz_t(), b, k_lo);
  mpz_class total = term;
  for (std::uint64_t k = k_lo; k < k_hi; ++k) {
    term *= (b - k);
    mpz_divexact_ui(term.get_mpz_t(), term.get_mpz_t(), k + 1);
    total += term;
  }
  long exponent = 0;
  const double mantissa = mpz_get_d_2exp(&exponent, total.get_mpz_t());
  return std::ldexp(mantissa, static_cast<int>(exponent - static_cast<long>(b)));
}

struct ScalingFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  bool degenerate = false;
  FitResult fit;
  std::vector<std::pair<double, double>> points;
};

/// Log-log slope of the exact tie probability against N.
inline ScalingFit scaling_fit(int dim, std::span<const std::uint64_t> sizes, double j_prime, double window) {
  if (sizes.size() < 5) throw std::invalid_argument("scaling fit needs at least five sizes");
  std::uint64_t lo = sizes[0], hi = sizes[0];
  for (auto n : sizes) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (hi < 50 * lo) throw std::invalid_argument("sizes must span a factor of at least 50");

  ScalingFit out;
  for (auto n : sizes)
    out.points.emplace_back(static_cast<double>(n), tie_probability_exact(dim, n, j_prime, window));
  bool all_equal = true;
  for (auto& p : out.points) all_equal = all_equal && p.second == out.points[0].second;
  if (all_equal) {
    out.degenerate = true;
    return out;
  }
  out.fit = fit_powerlaw(out.points);
  out.slope = out.fit.slope;
  out.stderr_ = out.fit.slope_stderr;
  return out;
}

struct ScanEntry {
  int n;
  long shell_sum;
  GroundStateOutcome outcome;
};

/// Classification of every cube N = 1..n_max under one fixed infinite
/// boundary field (keyed by `seed`).
inline std::vector<ScanEntry> recurrence_scan(std::uint64_t seed, int dim, double j_prime, int n_max,
                                              double delta) {
  std::vector<ScanEntry> out;
  out.reserve(static_cast<std::size_t>(std::max(n_max, 0)));
  for (int n = 1; n <= n_max; ++n) {
    const long s = shell_sum(seed, dim, n);
    out.push_back({n, s, ground_state_outcome(j_prime * static_cast<double>(s), delta)});
  }
  return out;
}

}  // namespace rbc

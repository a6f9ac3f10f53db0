#pragma once

// Sample surveys over random boundary fields built on the exact solvers.
// Sample s uses the infinite field keyed by derive_seed(master, {tag, s}), so
// one sample is the same field restricted to every size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rbc/exact/enumeration.hpp"
#include "rbc/exact/free_energy.hpp"
#include "rbc/exact/transfer_matrix.hpp"
#include "rbc/experiment/seed.hpp"
#include "rbc/parallel.hpp"
#include "rbc/stats.hpp"

namespace rbc {

inline BoundaryCondition sample_eta(const Volume& vol, std::uint64_t master, std::string_view tag, std::size_t s) {
  return sample_boundary(vol, BoundaryKind::symmetric_iid, derive_seed(master, {tag, s}));
}

/// Magnetization-proxy F_+ - F_- of the square box of side w.
inline FreeEnergyPair square_free_energies(int w, const Couplings& c, const BoundaryCondition& eta) {
  return free_energy_pair(transfer_matrix(build_volume(2, w), c, eta, {}, true));
}

struct FeSurveyParams {
  std::vector<int> widths;
  Couplings couplings{-1.2, -1.0};
  std::size_t samples = 1000;
  double tau = 1.0;
  /// When set, the threshold at width W is W^epsilon instead of tau.
  std::optional<double> epsilon;
  std::uint64_t master_seed = 1;
  int workers = 1;
};

struct FeSurveyRow {
  int size = 0;
  std::size_t samples = 0;
  double threshold = 0.0;
  long hits = 0;
  double probability = 0.0;
  Interval ci;
  double mean_delta = 0.0;
  double stderr_delta = 0.0;
  /// Sample mean of min_{W' >= W} |F_+ - F_-| along the sampled widths.
  double tail_min_abs_delta = 0.0;
};

/// Per-width rows from the sample-major matrix delta[s * widths + k].
inline std::vector<FeSurveyRow> fe_survey_rows(const std::vector<int>& widths, const std::vector<double>& delta,
                                               std::size_t samples, double tau, std::optional<double> epsilon) {
  const std::size_t nw = widths.size();
  if (delta.size() != samples * nw) throw std::invalid_argument("delta matrix has the wrong shape");
  std::vector<FeSurveyRow> rows;
  for (std::size_t k = 0; k < nw; ++k) {
    FeSurveyRow r;
    r.size = widths[k];
    r.samples = samples;
    r.threshold = epsilon ? std::pow(static_cast<double>(r.size), *epsilon) : tau;
    std::vector<double> d(samples);
    double tail = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      d[s] = delta[s * nw + k];
      r.hits += std::abs(d[s]) <= r.threshold;
      double m = std::abs(d[s]);
      for (std::size_t k2 = k + 1; k2 < nw; ++k2) m = std::min(m, std::abs(delta[s * nw + k2]));
      tail += m;
    }
    r.probability = samples ? static_cast<double>(r.hits) / static_cast<double>(samples) : 0.0;
    r.ci = wilson_interval(r.hits, static_cast<long>(samples));
    r.mean_delta = mean(d);
    r.stderr_delta = samples > 1 ? std::sqrt(variance(d) / static_cast<double>(samples)) : 0.0;
    r.tail_min_abs_delta = samples ? tail / static_cast<double>(samples) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

/// Empirical Prob(|F_+ - F_-| <= threshold) per width.
inline std::vector<FeSurveyRow> fe_difference_survey(const FeSurveyParams& p) {
  if (p.widths.empty()) throw std::invalid_argument("survey needs at least one width");
  for (int w : p.widths)
    if (w < 1 || w > max_resolved_transfer_width) throw std::invalid_argument("width outside transfer-matrix limits");
  if (!std::is_sorted(p.widths.begin(), p.widths.end())) throw std::invalid_argument("widths must be increasing");
  const std::size_t nw = p.widths.size();
  std::vector<double> delta(p.samples * nw);
  parallel_for(p.samples, p.workers, [&](std::size_t s) {
    for (std::size_t k = 0; k < nw; ++k) {
      const auto vol = build_volume(2, p.widths[k]);
      delta[s * nw + k] = square_free_energies(p.widths[k], p.couplings, sample_eta(vol, p.master_seed, "fe-survey", s)).delta;
    }
  });
  return fe_survey_rows(p.widths, delta, p.samples, p.tau, p.epsilon);
}

struct ProbeParams {
  std::vector<int> sizes;
  Couplings couplings{-2.0, -1.0};
  std::size_t samples = 100;
  /// Required ratio -J / |J'|.
  double coupling_ratio = 2.0;
  std::uint64_t master_seed = 1;
  int workers = 1;
};

struct ProbeRow {
  int size = 0;
  double pure_plus = 0.0;
  double pure_minus = 0.0;
  double worst_plus = 0.0;
  double worst_minus = 0.0;
  double mean_plus = 0.0;
  double mean_minus = 0.0;
};

/// Origin magnetization in the plus/minus restricted ensembles of one volume,
/// plus the full-measure values under all-plus and all-minus boundaries.
class RestrictedSolver {
 public:
  RestrictedSolver(int n, Couplings c) : vol_(build_volume(2, n)), c_(c) {
    if (vol_.num_sites() <= max_enumeration_sites) table_ = std::make_unique<EnsembleTable>(vol_, origin_window(vol_));
    else if (n > max_resolved_transfer_width) throw std::invalid_argument("probe size outside solver limits");
  }

  const Volume& volume() const noexcept { return vol_; }

  /// (plus, minus) restricted origin magnetization.
  std::pair<double, double> restricted(const BoundaryCondition& eta) const {
    if (table_) {
      const auto r = table_->evaluate(c_, eta);
      return {r.plus.expectations[0], r.minus.expectations[0]};
    }
    const auto r = transfer_matrix(vol_, c_, eta, origin_window(vol_), true);
    return {restricted_expectations(r, EnsembleLabel::Plus)[0], restricted_expectations(r, EnsembleLabel::Minus)[0]};
  }

  double full(const BoundaryCondition& eta) const {
    if (table_) return table_->evaluate(c_, eta).full.expectations[0];
    return transfer_matrix(vol_, c_, eta, origin_window(vol_), false).expectations[0];
  }

 private:
  Volume vol_;
  Couplings c_;
  std::unique_ptr<EnsembleTable> table_;
};

/// Worst case over sampled fields of |<s_0>_{eta,+-} - <s_0>_{+- bc}| per size.
inline std::vector<ProbeRow> restricted_convergence_probe(const ProbeParams& p) {
  if (-p.couplings.j < p.coupling_ratio * std::abs(p.couplings.j_prime) || -p.couplings.j < 1.5)
    throw std::invalid_argument("probe needs -J >= ratio * |J'| and -J >= 1.5");
  std::vector<ProbeRow> rows;
  for (int n : p.sizes) {
    const RestrictedSolver solver(n, p.couplings);
    ProbeRow row;
    row.size = n;
    row.pure_plus = solver.full(sample_boundary(solver.volume(), BoundaryKind::all_plus));
    row.pure_minus = solver.full(sample_boundary(solver.volume(), BoundaryKind::all_minus));
    std::vector<std::pair<double, double>> dev(p.samples);
    parallel_for(p.samples, p.workers, [&](std::size_t s) {
      const auto [mp, mm] = solver.restricted(sample_eta(solver.volume(), p.master_seed, "restricted-probe", s));
      dev[s] = {std::abs(mp - row.pure_plus), std::abs(mm - row.pure_minus)};
    });
    for (const auto& [a, b] : dev) {
      row.worst_plus = std::max(row.worst_plus, a);
      row.worst_minus = std::max(row.worst_minus, b);
      row.mean_plus += a / static_cast<double>(p.samples);
      row.mean_minus += b / static_cast<double>(p.samples);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rbc

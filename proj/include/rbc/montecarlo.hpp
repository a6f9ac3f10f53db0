#pragma once

// Heat-bath Monte Carlo with an optional replica-exchange ladder.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rbc/exact/enumeration.hpp"
#include "rbc/lattice.hpp"
#include "rbc/rng.hpp"
#include "rbc/stats.hpp"

namespace rbc {

/// Neighbour lists of a Model in compressed-row form.
struct LocalModel {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> neighbours;
  std::vector<double> couplings;
  std::vector<double> field;

  explicit LocalModel(const Model& m) : field(m.field) {
    const std::size_t n = m.volume.num_sites();
    offsets.assign(n + 1, 0);
    for (const auto& b : m.bonds) {
      if (b.i == b.j) continue;  // a self-bond only adds a constant
      ++offsets[b.i + 1];
      ++offsets[b.j + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    neighbours.resize(offsets[n]);
    couplings.resize(offsets[n]);
    std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
    for (const auto& b : m.bonds) {
      if (b.i == b.j) continue;
      neighbours[fill[b.i]] = b.j;
      couplings[fill[b.i]++] = b.coupling;
      neighbours[fill[b.j]] = b.i;
      couplings[fill[b.j]++] = b.coupling;
    }
  }

  std::size_t num_sites() const noexcept { return field.size(); }

  double local_field(const SpinConfig& s, std::size_t i) const noexcept {
    double h = field[i];
    for (std::uint32_t k = offsets[i]; k < offsets[i + 1]; ++k) h += couplings[k] * s[neighbours[k]];
    return h;
  }
};

/// One heat-bath pass in row-major order at inverse temperature `beta`
/// (couplings and fields multiplied by beta).
inline void heatbath_sweep(SpinConfig& s, const LocalModel& m, Rng& rng, double beta = 1.0) {
  if (s.size() != m.num_sites()) throw std::invalid_argument("configuration does not match the model");
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double h = beta * m.local_field(s, i);
    const double p_plus = 1.0 / (1.0 + std::exp(2.0 * h));
    s.set(i, uniform01(rng) < p_plus ? 1 : -1);
  }
}

inline void heatbath_sweep(SpinConfig& s, const Volume& vol, const Couplings& c, const BoundaryCondition& eta, Rng& rng) {
  check_domain(vol, s, eta);
  heatbath_sweep(s, LocalModel(make_model(vol, c, eta)), rng);
}

struct ChainConfig {
  Volume vol = build_volume(2, 1);
  Couplings couplings;
  BoundaryCondition eta;
  std::size_t sweeps_total = 10000;
  std::size_t sweeps_burnin = 2000;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  /// Temperature multipliers, strictly decreasing to 1. Replica r runs with
  /// couplings divided by ladder[r]; measurements come from the last one.
  std::vector<double> ladder;

  void validate() const {
    if (sweeps_burnin >= sweeps_total) throw std::invalid_argument("burn-in must be shorter than the run");
    if (thinning < 1) throw std::invalid_argument("thinning must be >= 1");
    if (!ladder.empty()) {
      if (ladder.back() != 1.0) throw std::invalid_argument("ladder must end at multiplier 1");
      for (std::size_t k = 1; k < ladder.size(); ++k)
        if (!(ladder[k] < ladder[k - 1])) throw std::invalid_argument("ladder multipliers must strictly decrease");
    }
    if (eta.has_values() && eta.values.size() != vol.boundary_sites().size())
      throw std::invalid_argument("boundary condition does not cover the boundary shell");
  }
};

/// Geometric ladder of `replicas` multipliers from `top` down to 1.
inline std::vector<double> geometric_ladder(int replicas, double top) {
  if (replicas < 1 || !(top >= 1.0)) throw std::invalid_argument("bad ladder parameters");
  std::vector<double> l;
  for (int r = 0; r < replicas; ++r)
    l.push_back(replicas == 1 ? 1.0 : std::pow(top, 1.0 - static_cast<double>(r) / (replicas - 1)));
  l.back() = 1.0;
  return l;
}

struct ChainEstimate {
  Window window;
  std::vector<BatchEstimate> estimates;
  std::size_t samples = 0;
  double swap_acceptance = 0.0;

  WindowMarginal marginal() const {
    WindowMarginal w{window, {}};
    for (const auto& e : estimates) w.expectations.push_back(e.mean);
    return w;
  }
};

inline ChainEstimate run_chain(const ChainConfig& cfg, const Window& window) {
  cfg.validate();
  detail::check_window(window, cfg.vol.num_sites());
  const LocalModel model(make_model(cfg.vol, cfg.couplings, cfg.eta));
  const std::size_t n = cfg.vol.num_sites();
  const std::vector<double> ladder = cfg.ladder.empty() ? std::vector<double>{1.0} : cfg.ladder;
  const std::size_t nr = ladder.size();

  Rng rng(cfg.seed);
  std::vector<SpinConfig> rep;
  for (std::size_t r = 0; r < nr; ++r) {
    SpinConfig s(n);
    for (std::size_t i = 0; i < n; ++i) s.set(i, random_sign(rng));
    rep.push_back(std::move(s));
  }
  auto energy = [&](const SpinConfig& s) {
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double h = 2.0 * model.field[i];
      for (std::uint32_t k = model.offsets[i]; k < model.offsets[i + 1]; ++k) h += model.couplings[k] * s[model.neighbours[k]];
      e += 0.5 * h * s[i];
    }
    return e;
  };

  std::vector<std::vector<double>> series(window.size());
  std::size_t tried = 0, accepted = 0;
  for (std::size_t sweep = 0; sweep < cfg.sweeps_total; ++sweep) {
    for (std::size_t r = 0; r < nr; ++r) heatbath_sweep(rep[r], model, rng, 1.0 / ladder[r]);
    if (nr > 1) {
      // Alternate even and odd neighbour pairs.
      for (std::size_t r = sweep % 2; r + 1 < nr; r += 2) {
        const double ba = 1.0 / ladder[r], bb = 1.0 / ladder[r + 1];
        const double x = (ba - bb) * (energy(rep[r]) - energy(rep[r + 1]));
        ++tried;
        if (x >= 0 || uniform01(rng) < std::exp(x)) {
          std::swap(rep[r], rep[r + 1]);
          ++accepted;
        }
      }
    }
    if (sweep >= cfg.sweeps_burnin && (sweep - cfg.sweeps_burnin) % cfg.thinning == 0) {
      const auto& s = rep.back();
      for (std::size_t c = 0; c < window.size(); ++c) series[c].push_back(window[c].value(s));
    }
  }

  ChainEstimate out;
  out.window = window;
  out.samples = series.empty() ? 0 : series[0].size();
  out.swap_acceptance = tried ? static_cast<double>(accepted) / static_cast<double>(tried) : 0.0;
  for (const auto& x : series) out.estimates.push_back(batch_means(x, 32));
  return out;
}

}  // namespace rbc

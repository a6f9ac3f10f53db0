#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rbc/exact/enumeration.hpp"
#include "rbc/exact/transfer_matrix.hpp"
#include "rbc/stats.hpp"

namespace rbc {

/// Restricted free energies F_+- = log Z_+-, delta = F_+ - F_-.
struct FreeEnergyPair {
  double f_plus = 0.0;
  double f_minus = 0.0;
  double delta = 0.0;
};

inline FreeEnergyPair make_pair_checked(double fp, double fm) {
  if (!std::isfinite(fp) || !std::isfinite(fm)) throw std::domain_error("restricted partition function vanishes");
  return {fp, fm, fp - fm};
}

inline FreeEnergyPair free_energy_pair(const EnumerationResult& r) {
  return make_pair_checked(r.plus.log_z, r.minus.log_z);
}

/// Magnetization-sign proxy: Z_+- = Z_{M>0 / M<0} + Z_{M=0} / 2.
inline FreeEnergyPair free_energy_pair(const TransferResult& r) {
  if (!r.resolved) throw std::invalid_argument("transfer result lacks magnetization resolution");
  const double half_zero = r.log_z_zero - std::numbers::ln2;
  return make_pair_checked(log_add(r.log_z_pos, half_zero), log_add(r.log_z_neg, half_zero));
}

/// Window expectations in the restricted proxy ensembles of a resolved
/// transfer-matrix result.
inline std::vector<double> restricted_expectations(const TransferResult& r, EnsembleLabel l) {
  if (!r.resolved) throw std::invalid_argument("transfer result lacks magnetization resolution");
  const bool plus = l == EnsembleLabel::Plus;
  const double lz = plus ? r.log_z_pos : r.log_z_neg;
  const double lz0 = r.log_z_zero - std::numbers::ln2;
  const double top = std::max(lz, lz0);
  const double a = std::isfinite(lz) ? std::exp(lz - top) : 0.0;
  const double b = std::isfinite(lz0) ? std::exp(lz0 - top) : 0.0;
  const auto& ea = plus ? r.exp_pos : r.exp_neg;
  std::vector<double> out(r.window.size(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::clamp((a * ea[c] + b * r.exp_zero[c]) / (a + b), -1.0, 1.0);
  return out;
}

/// Convex weights w_+- = 1 / (1 + Z_-+ / Z_+-). The larger weight is computed
/// directly and the smaller one as its complement, so they sum to exactly 1.
struct ConvexWeights {
  double w_plus;
  double w_minus;
};

inline ConvexWeights convex_weights(const FreeEnergyPair& f) {
  if (f.delta >= 0) {
    const double wp = 1.0 / (1.0 + std::exp(-f.delta));
    return {wp, 1.0 - wp};
  }
  const double wm = 1.0 / (1.0 + std::exp(f.delta));
  return {1.0 - wm, wm};
}

struct DecompositionCheck {
  ConvexWeights weights;
  double max_deviation = 0.0;
};

inline DecompositionCheck decompose(const EnumerationResult& r) {
  DecompositionCheck out{convex_weights(free_energy_pair(r)), 0.0};
  for (std::size_t c = 0; c < r.window.size(); ++c) {
    const double mix = out.weights.w_plus * r.plus.expectations[c] + out.weights.w_minus * r.minus.expectations[c];
    out.max_deviation = std::max(out.max_deviation, std::abs(r.full.expectations[c] - mix));
  }
  return out;
}

inline double decompose_check(const Volume& vol, const Couplings& c, const BoundaryCondition& eta,
                              const Window& window) {
  return decompose(enumerate(vol, c, eta, window)).max_deviation;
}

}  // namespace rbc

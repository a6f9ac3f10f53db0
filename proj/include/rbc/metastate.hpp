#pragma once

// Volume sequences, limit points of the finite-volume states along a
// sequence at fixed boundary field, and empirical metastates.
//
// A state is represented by its descriptor: the expectations of a fixed
// window at the origin (origin spin, then its d nearest-neighbour pairs).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbc/exact/enumeration.hpp"
#include "rbc/exact/transfer_matrix.hpp"
#include "rbc/experiment/seed.hpp"
#include "rbc/groundstate.hpp"
#include "rbc/montecarlo.hpp"
#include "rbc/parallel.hpp"

namespace rbc {

enum class SequenceKind { full, geometric, polynomial };

inline std::string_view to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::full: return "full";
    case SequenceKind::geometric: return "geometric";
    case SequenceKind::polynomial: return "polynomial";
  }
  return "?";
}

struct VolumeSequence {
  SequenceKind kind = SequenceKind::full;
  /// N_max for full, the base for geometric, the power for polynomial.
  double parameter = 0.0;
  int k_max = 0;
  int dim = 2;
  std::vector<int> sizes;
};

/// Upper bound on sum_{k > k_max} N_k^{-(d-1)/2} for the rule generating the
/// sequence; infinity when the series diverges.
inline double summability_tail_bound(const VolumeSequence& s) {
  const double a = (s.dim - 1) / 2.0;
  switch (s.kind) {
    case SequenceKind::full:
      // N_k = k: sum k^{-a} diverges for a <= 1.
      if (a <= 1.0) return std::numeric_limits<double>::infinity();
      return std::pow(s.k_max, 1.0 - a) / (a - 1.0);
    case SequenceKind::geometric: {
      const double r = std::pow(s.parameter, -a);
      if (r >= 1.0) return std::numeric_limits<double>::infinity();
      return std::pow(r, s.k_max + 1) / (1.0 - r);
    }
    case SequenceKind::polynomial: {
      const double e = s.parameter * a;  // N_k^{-a} = k^{-e}
      if (e <= 1.0) return std::numeric_limits<double>::infinity();
      return std::pow(static_cast<double>(s.k_max), 1.0 - e) / (e - 1.0);
    }
  }
  return std::numeric_limits<double>::infinity();
}

inline bool is_summable(const VolumeSequence& s) { return std::isfinite(summability_tail_bound(s)); }

/// full: parameter = N_max, sizes 1..N_max. geometric: N_k = base^k,
/// k = 1..k_max. polynomial: N_k = k^power, k = 1..k_max. Sparse kinds must
/// pass the summability check for `dim`.
inline VolumeSequence make_sequence(SequenceKind kind, double parameter, int k_max, int dim) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
  if (!(parameter > 0)) throw std::invalid_argument("sequence parameter must be positive");
  VolumeSequence s{kind, parameter, k_max, dim, {}};
  switch (kind) {
    case SequenceKind::full:
      s.k_max = static_cast<int>(parameter);
      for (int n = 1; n <= s.k_max; ++n) s.sizes.push_back(n);
      break;
    case SequenceKind::geometric:
    case SequenceKind::polynomial:
      if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
      for (int k = 1; k <= k_max; ++k) {
        const double v = kind == SequenceKind::geometric ? std::pow(parameter, k) : std::pow(k, parameter);
        if (v > 1e9) throw std::invalid_argument("sequence exceeds supported sizes");
        s.sizes.push_back(static_cast<int>(std::llround(v)));
      }
      break;
  }
  for (std::size_t k = 1; k < s.sizes.size(); ++k)
    if (s.sizes[k] <= s.sizes[k - 1]) throw std::invalid_argument("sequence must be strictly increasing");
  if (kind != SequenceKind::full && !is_summable(s))
    throw std::invalid_argument("sequence fails the summability check for this dimension");
  return s;
}

/// Size-independent description of a boundary condition: the same spec
/// gives nested restrictions of one infinite field.
struct BoundarySpec {
  BoundaryKind kind = BoundaryKind::symmetric_iid;
  std::uint64_t seed = 0;
  bool negate = false;

  BoundaryCondition on(const Volume& vol) const {
    auto bc = sample_boundary(vol, kind, seed);
    return negate ? flip(bc) : bc;
  }
};

enum class StateClass { plus_like, minus_like, mixed };

inline std::string_view to_string(StateClass c) {
  switch (c) {
    case StateClass::plus_like: return "plus-like";
    case StateClass::minus_like: return "minus-like";
    case StateClass::mixed: return "mixed";
  }
  return "?";
}

inline StateClass classify_descriptor(double origin_magnetization, double m_star) {
  if (origin_magnetization >= m_star) return StateClass::plus_like;
  if (origin_magnetization <= -m_star) return StateClass::minus_like;
  return StateClass::mixed;
}

/// Finite-volume state of the cube of side n under a boundary spec.
class StateProvider {
 public:
  virtual ~StateProvider() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> descriptor(int n, const BoundarySpec& eta) const = 0;
  /// Classification threshold m* at size n.
  virtual double threshold(int n) const = 0;
  virtual StateClass classify(int n, double origin_magnetization) const {
    return classify_descriptor(origin_magnetization, threshold(n));
  }
  virtual std::string describe() const = 0;
};

/// -J = infinity: the state is p+ delta_plus + p- delta_minus, whose window
/// expectations are (p+ - p-, 1, ..., 1). With a selection threshold delta
/// the classification is the GroundStateOutcome one (mixed iff p+ in
/// [delta, 1 - delta]) instead of the m* rule.
class GroundStateProvider : public StateProvider {
 public:
  GroundStateProvider(int dim, double j_prime, double m_star = 0.9, std::optional<double> delta = std::nullopt)
      : dim_(dim), jp_(j_prime), m_star_(m_star), delta_(delta) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
    if (delta_ && !(*delta_ > 0 && *delta_ < 0.5)) throw std::invalid_argument("delta must lie in (0, 1/2)");
  }
  int dim() const override { return dim_; }

  long boundary_sum(int n, const BoundarySpec& eta) const {
    long s = 0;
    switch (eta.kind) {
      case BoundaryKind::symmetric_iid: s = shell_sum(eta.seed, dim_, n); break;
      case BoundaryKind::all_plus: s = static_cast<long>(shell_size(dim_, n)); break;
      case BoundaryKind::all_minus: s = -static_cast<long>(shell_size(dim_, n)); break;
      case BoundaryKind::free:
      case BoundaryKind::periodic: s = 0; break;
      case BoundaryKind::dobrushin: {
        std::vector<int> extent(static_cast<std::size_t>(dim_), n);
        std::vector<std::int64_t> lower(static_cast<std::size_t>(dim_), centered_lower(n));
        for_each_boundary_bond(extent, lower, [&](std::uint32_t, const Coord& c) { s += c[0] < 0 ? -1 : 1; });
        break;
      }
      case BoundaryKind::explicit_values: throw std::invalid_argument("explicit values have no size-independent form");
    }
    return eta.negate ? -s : s;
  }

  GroundStateOutcome outcome(int n, const BoundarySpec& eta, double delta) const {
    return ground_state_outcome(jp_ * static_cast<double>(boundary_sum(n, eta)), delta);
  }

  std::vector<double> descriptor(int n, const BoundarySpec& eta) const override {
    const auto p = selection_prob(jp_ * static_cast<double>(boundary_sum(n, eta)));
    std::vector<double> d(1 + static_cast<std::size_t>(dim_), 1.0);
    d[0] = p.p_plus - p.p_minus;
    return d;
  }
  double threshold(int) const override { return delta_ ? 1.0 - 2.0 * *delta_ : m_star_; }
  StateClass classify(int, double m) const override {
    if (!delta_) return classify_descriptor(m, m_star_);
    const double p_plus = 0.5 * (1.0 + m);
    switch (classify_probability(p_plus, *delta_)) {
      case Classification::Plus: return StateClass::plus_like;
      case Classification::Minus: return StateClass::minus_like;
      case Classification::Mixed: return StateClass::mixed;
    }
    return StateClass::mixed;
  }
  std::string describe() const override {
    std::ostringstream o;
    o << "ground-state d=" << dim_ << " jprime=" << jp_ << " mstar=" << m_star_;
    if (delta_) o << " delta=" << *delta_;
    return o.str();
  }

 private:
  int dim_;
  double jp_;
  double m_star_;
  std::optional<double> delta_;
};

/// Finite-temperature providers calibrate m* as a fraction of the origin
/// magnetization under an all-plus boundary on the same volume. With J' = 0
/// the boundary is invisible, so the plus boundary is coupled with J instead.
class CalibratedProvider : public StateProvider {
 public:
  CalibratedProvider(int dim, Couplings c, double fraction) : dim_(dim), c_(c), fraction_(fraction) {}
  int dim() const override { return dim_; }
  double threshold(int n) const override {
    {
      std::lock_guard lock(mu_);
      if (auto it = cal_.find(n); it != cal_.end()) return it->second;
    }
    const double m = calibration(n);
    std::lock_guard lock(mu_);
    return cal_[n] = fraction_ * m;
  }

 protected:
  Couplings calibration_couplings() const { return c_.j_prime == 0.0 ? Couplings{c_.j, c_.j} : c_; }
  virtual double calibration(int n) const = 0;

  int dim_;
  Couplings c_;
  double fraction_;

 private:
  mutable std::mutex mu_;
  mutable std::map<int, double> cal_;
};

class EnumerationProvider : public CalibratedProvider {
 public:
  explicit EnumerationProvider(int dim, Couplings c, double fraction = 0.9) : CalibratedProvider(dim, c, fraction) {}

  std::vector<double> descriptor(int n, const BoundarySpec& eta) const override {
    const auto vol = build_volume(dim_, n);
    return state(vol, c_, eta.on(vol));
  }
  std::string describe() const override {
    std::ostringstream o;
    o << "enumeration d=" << dim_ << " j=" << c_.j << " jprime=" << c_.j_prime << " fraction=" << fraction_;
    return o.str();
  }

 protected:
  double calibration(int n) const override {
    const auto vol = build_volume(dim_, n);
    return state(vol, calibration_couplings(), sample_boundary(vol, BoundaryKind::all_plus, 0))[0];
  }

 private:
  std::vector<double> state(const Volume& vol, const Couplings& c, const BoundaryCondition& bc) const {
    if (bc.kind == BoundaryKind::periodic) return enumerate(make_model(vol, c, bc), canonical_window(vol)).full.expectations;
    return table(vol).evaluate(c, bc).full.expectations;
  }
  const EnsembleTable& table(const Volume& vol) const {
    std::lock_guard lock(mu_);
    auto& t = tables_[vol.size()];
    if (!t) t = std::make_unique<EnsembleTable>(vol, canonical_window(vol));
    return *t;
  }
  mutable std::mutex mu_;
  mutable std::map<int, std::unique_ptr<EnsembleTable>> tables_;
};

class TransferMatrixProvider : public CalibratedProvider {
 public:
  explicit TransferMatrixProvider(Couplings c, double fraction = 0.9) : CalibratedProvider(2, c, fraction) {}

  std::vector<double> descriptor(int n, const BoundarySpec& eta) const override {
    const auto vol = build_volume(2, n);
    return state(vol, c_, eta.on(vol));
  }
  std::string describe() const override {
    std::ostringstream o;
    o << "transfer-matrix j=" << c_.j << " jprime=" << c_.j_prime << " fraction=" << fraction_;
    return o.str();
  }

 protected:
  double calibration(int n) const override {
    const auto vol = build_volume(2, n);
    return state(vol, calibration_couplings(), sample_boundary(vol, BoundaryKind::all_plus, 0))[0];
  }

 private:
  static std::vector<double> state(const Volume& vol, const Couplings& c, const BoundaryCondition& bc) {
    if (bc.kind == BoundaryKind::periodic) throw std::invalid_argument("transfer matrix does not support periodic boundaries");
    return transfer_matrix(vol, c, bc, canonical_window(vol), false).expectations;
  }
};

class MonteCarloProvider : public CalibratedProvider {
 public:
  MonteCarloProvider(int dim, Couplings c, std::size_t sweeps, std::vector<double> ladder, double fraction = 0.9)
      : CalibratedProvider(dim, c, fraction), sweeps_(sweeps), ladder_(std::move(ladder)) {}

  std::vector<double> descriptor(int n, const BoundarySpec& eta) const override {
    const auto vol = build_volume(dim_, n);
    return state(vol, c_, eta.on(vol),
                 derive_seed(eta.seed, {"mc-provider", n, static_cast<int>(eta.kind), eta.negate ? 1 : 0}));
  }
  std::string describe() const override {
    std::ostringstream o;
    o << "monte-carlo d=" << dim_ << " j=" << c_.j << " jprime=" << c_.j_prime << " sweeps=" << sweeps_
      << " replicas=" << ladder_.size() << " fraction=" << fraction_;
    return o.str();
  }

 protected:
  double calibration(int n) const override {
    const auto vol = build_volume(dim_, n);
    return state(vol, calibration_couplings(), sample_boundary(vol, BoundaryKind::all_plus, 0),
                 derive_seed(0, {"mc-calibration", n}))[0];
  }

 private:
  std::vector<double> state(const Volume& vol, const Couplings& c, const BoundaryCondition& bc, std::uint64_t seed) const {
    ChainConfig cfg{vol, c, bc, sweeps_, sweeps_ / 5, 1, seed, ladder_};
    return run_chain(cfg, canonical_window(vol)).marginal().expectations;
  }
  std::size_t sweeps_;
  std::vector<double> ladder_;
};

inline double max_norm_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("descriptor windows differ");
  double d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

struct Atom {
  std::vector<double> descriptor;
  double weight = 0.0;
  std::size_t visits = 0;
  StateClass classification = StateClass::mixed;
};

namespace detail {

/// Sequential clustering in input order: a descriptor joins the first atom
/// whose centroid lies within `radius`, else opens a new atom. Atoms whose
/// centroids drift within `radius` of each other are merged afterwards.
inline std::vector<Atom> cluster(const std::vector<std::vector<double>>& ds, double radius,
                                 std::vector<std::size_t>* assignment = nullptr) {
  std::vector<Atom> atoms;
  std::vector<std::vector<double>> sums;
  std::vector<std::size_t> assign;
  for (const auto& d : ds) {
    std::size_t k = 0;
    for (; k < atoms.size(); ++k)
      if (max_norm_distance(atoms[k].descriptor, d) <= radius) break;
    if (k == atoms.size()) {
      atoms.push_back({d, 0.0, 0, StateClass::mixed});
      sums.push_back(std::vector<double>(d.size(), 0.0));
    }
    ++atoms[k].visits;
    for (std::size_t c = 0; c < d.size(); ++c) {
      sums[k][c] += d[c];
      atoms[k].descriptor[c] = sums[k][c] / static_cast<double>(atoms[k].visits);
    }
    assign.push_back(k);
  }
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t a = 0; a < atoms.size() && !merged; ++a)
      for (std::size_t b = a + 1; b < atoms.size() && !merged; ++b)
        if (max_norm_distance(atoms[a].descriptor, atoms[b].descriptor) <= radius) {
          atoms[a].visits += atoms[b].visits;
          for (std::size_t c = 0; c < sums[a].size(); ++c) {
            sums[a][c] += sums[b][c];
            atoms[a].descriptor[c] = sums[a][c] / static_cast<double>(atoms[a].visits);
          }
          atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(b));
          sums.erase(sums.begin() + static_cast<std::ptrdiff_t>(b));
          for (auto& x : assign) {
            if (x == b) x = a;
            else if (x > b) --x;
          }
          merged = true;
        }
  }
  if (assignment) *assignment = std::move(assign);
  return atoms;
}

}  // namespace detail

struct Visit {
  int size = 0;
  std::size_t atom = 0;
  StateClass classification = StateClass::mixed;
  std::vector<double> descriptor;
};

struct LimitPointTrack {
  std::vector<Atom> atoms;
  std::vector<Visit> visits;

  std::size_t mixed_visits(int min_size = 0) const {
    std::size_t k = 0;
    for (const auto& v : visits) k += v.size >= min_size && v.classification == StateClass::mixed;
    return k;
  }
};

/// States along a volume sequence at one fixed boundary field.
inline LimitPointTrack track_limit_points(const BoundarySpec& eta, const VolumeSequence& seq, const StateProvider& provider,
                                          double radius = 0.1, int workers = 1) {
  if (provider.dim() != seq.dim) throw std::invalid_argument("provider and sequence dimensions differ");
  std::vector<std::vector<double>> ds(seq.sizes.size());
  parallel_for(seq.sizes.size(), workers, [&](std::size_t k) { ds[k] = provider.descriptor(seq.sizes[k], eta); });
  LimitPointTrack t;
  std::vector<std::size_t> assign;
  t.atoms = detail::cluster(ds, radius, &assign);
  for (std::size_t k = 0; k < ds.size(); ++k)
    t.visits.push_back({seq.sizes[k], assign[k], provider.classify(seq.sizes[k], ds[k][0]), ds[k]});
  for (auto& a : t.atoms) {
    a.weight = static_cast<double>(a.visits) / static_cast<double>(ds.size());
    a.classification = provider.classify(seq.sizes.back(), a.descriptor[0]);
  }
  return t;
}

enum class Provenance { over_eta, over_volumes };

inline std::string_view to_string(Provenance p) { return p == Provenance::over_eta ? "over-eta" : "over-volumes"; }

struct EmpiricalMetastate {
  Provenance provenance = Provenance::over_eta;
  std::string params_digest;
  std::vector<Atom> atoms;
  /// Combined weight of atoms not classified as pure.
  double unclustered_mass = 0.0;

  double pure_mass() const { return 1.0 - unclustered_mass; }
};

struct OverEtaParams {
  int size = 16;
  std::size_t samples = 1000;
  BoundaryKind kind = BoundaryKind::symmetric_iid;
  bool negate = false;
  std::uint64_t master_seed = 1;
  double radius = 0.1;
  int workers = 1;
};

inline std::string digest_hex(std::string_view text) {
  static const char* hex = "0123456789abcdef";
  std::uint64_t h = hash_string(text);
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) s[k] = hex[h & 15];
  return s;
}

namespace detail {
inline EmpiricalMetastate finish_metastate(Provenance p, std::string digest, std::vector<Atom> atoms, std::size_t total,
                                           const StateProvider& provider, int n) {
  EmpiricalMetastate m{p, std::move(digest), std::move(atoms), 0.0};
  CompensatedSum mixed;
  for (auto& a : m.atoms) {
    a.weight = static_cast<double>(a.visits) / static_cast<double>(total);
    a.classification = provider.classify(n, a.descriptor[0]);
    if (a.classification == StateClass::mixed) mixed.add(a.weight);
  }
  m.unclustered_mass = mixed.value();
  return m;
}
}  // namespace detail

/// Clusters descriptors in the given order and classifies the atoms at size n.
inline EmpiricalMetastate metastate_from_descriptors(Provenance p, std::string digest,
                                                     const std::vector<std::vector<double>>& ds,
                                                     const StateProvider& provider, int n, double radius) {
  if (ds.empty()) throw std::invalid_argument("no descriptors");
  return detail::finish_metastate(p, std::move(digest), detail::cluster(ds, radius), ds.size(), provider, n);
}

inline std::uint64_t metastate_eta_seed(std::uint64_t master, std::size_t s) { return derive_seed(master, {"metastate", s}); }

/// Distribution of the state at one size over sampled boundary fields. Field
/// s is keyed by metastate_eta_seed(master, s).
inline EmpiricalMetastate empirical_metastate(const OverEtaParams& p, const StateProvider& provider) {
  if (p.samples < 1) throw std::invalid_argument("need at least one sample");
  std::vector<std::vector<double>> ds(p.samples);
  parallel_for(p.samples, p.workers, [&](std::size_t s) {
    ds[s] = provider.descriptor(p.size, BoundarySpec{p.kind, metastate_eta_seed(p.master_seed, s), p.negate});
  });
  std::ostringstream o;
  o << provider.describe() << " | over-eta N=" << p.size << " samples=" << p.samples << " kind=" << to_string(p.kind)
    << " negate=" << p.negate << " seed=" << p.master_seed << " radius=" << p.radius;
  return metastate_from_descriptors(Provenance::over_eta, digest_hex(o.str()), ds, provider, p.size, p.radius);
}

/// Distribution of the states visited along a volume sequence at one field.
inline EmpiricalMetastate empirical_metastate(const BoundarySpec& eta, const VolumeSequence& seq,
                                              const StateProvider& provider, double radius = 0.1, int workers = 1) {
  auto t = track_limit_points(eta, seq, provider, radius, workers);
  std::ostringstream o;
  o << provider.describe() << " | over-volumes kind=" << to_string(seq.kind) << " parameter=" << seq.parameter
    << " kmax=" << seq.k_max << " eta=" << to_string(eta.kind) << ":" << eta.seed << ":" << eta.negate
    << " radius=" << radius;
  return detail::finish_metastate(Provenance::over_volumes, digest_hex(o.str()), std::move(t.atoms), seq.sizes.size(),
                                  provider, seq.sizes.back());
}

struct AtomMatch {
  std::size_t a;
  std::size_t b;
  double distance;
  double weight_difference;  // weight in b minus weight in a
};

struct MetastateComparison {
  std::vector<AtomMatch> matches;
  double unmatched_mass_a = 0.0;
  double unmatched_mass_b = 0.0;
  double max_weight_difference = 0.0;
};

/// Greedy matching of atoms by descriptor distance (closest pairs first).
inline MetastateComparison compare_metastates(const EmpiricalMetastate& a, const EmpiricalMetastate& b, double tolerance) {
  std::vector<AtomMatch> cand;
  for (std::size_t i = 0; i < a.atoms.size(); ++i)
    for (std::size_t j = 0; j < b.atoms.size(); ++j) {
      const double d = max_norm_distance(a.atoms[i].descriptor, b.atoms[j].descriptor);
      if (d <= tolerance) cand.push_back({i, j, d, b.atoms[j].weight - a.atoms[i].weight});
    }
  std::stable_sort(cand.begin(), cand.end(), [](const AtomMatch& x, const AtomMatch& y) { return x.distance < y.distance; });
  std::vector<bool> used_a(a.atoms.size()), used_b(b.atoms.size());
  MetastateComparison out;
  for (const auto& c : cand) {
    if (used_a[c.a] || used_b[c.b]) continue;
    used_a[c.a] = used_b[c.b] = true;
    out.matches.push_back(c);
    out.max_weight_difference = std::max(out.max_weight_difference, std::abs(c.weight_difference));
  }
  for (std::size_t i = 0; i < a.atoms.size(); ++i)
    if (!used_a[i]) out.unmatched_mass_a += a.atoms[i].weight;
  for (std::size_t j = 0; j < b.atoms.size(); ++j)
    if (!used_b[j]) out.unmatched_mass_b += b.atoms[j].weight;
  return out;
}

inline nlohmann::json to_json(const EmpiricalMetastate& m) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : m.atoms)
    atoms.push_back({{"descriptor", a.descriptor},
                     {"weight", a.weight},
                     {"n_visits", a.visits},
                     {"classification", std::string(to_string(a.classification))}});
  return {{"provenance", std::string(to_string(m.provenance))},
          {"params_digest", m.params_digest},
          {"atoms", atoms},
          {"unclustered_mass", m.unclustered_mass}};
}

}  // namespace rbc

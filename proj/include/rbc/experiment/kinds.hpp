#pragma once

// Registry of experiment kinds. Each kind maps a resolved configuration to
// deterministically seeded tasks and reduces their results.

#include <cmath>
#include <map>
#include <memory>

#include "rbc/exact/enumeration.hpp"
#include "rbc/exact/free_energy.hpp"
#include "rbc/exact/surveys.hpp"
#include "rbc/exact/transfer_matrix.hpp"
#include "rbc/experiment/runner.hpp"
#include "rbc/fit.hpp"
#include "rbc/groundstate.hpp"
#include "rbc/metastate.hpp"
#include "rbc/montecarlo.hpp"
#include "rbc/stacked.hpp"

namespace rbc {

namespace kinds {

using Ints = std::vector<std::int64_t>;
using Reals = std::vector<double>;
using nlohmann::json;

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline int get_int(const ExperimentConfig& c, const std::string& name, std::int64_t lo = 0,
                   std::int64_t hi = std::numeric_limits<int>::max()) {
  const auto v = c.get<std::int64_t>(name);
  require(v >= lo && v <= hi, name + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

inline double get_real(const ExperimentConfig& c, const std::string& name) { return c.get<double>(name); }

inline std::vector<int> get_ints(const ExperimentConfig& c, const std::string& name, std::int64_t lo = 1,
                                 std::int64_t hi = std::numeric_limits<int>::max()) {
  std::vector<int> out;
  for (auto v : c.get<Ints>(name)) {
    require(v >= lo && v <= hi, name + " entries must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline void require_increasing(const std::vector<int>& v, const std::string& name) {
  require(!v.empty(), name + " must not be empty");
  for (std::size_t k = 1; k < v.size(); ++k) require(v[k] > v[k - 1], name + " must be strictly increasing");
}

inline Couplings couplings(const ExperimentConfig& c) { return {get_real(c, "j"), get_real(c, "j_prime")}; }

inline Check slope_check(const std::string& name, double slope, double target, double tol) {
  std::ostringstream o;
  o << "slope " << slope << ", target " << target << " +- " << tol;
  return {name, std::isfinite(slope) && std::abs(slope - target) <= tol, o.str()};
}

inline json fit_json(const FitResult& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"slope_stderr", f.slope_stderr}, {"r_squared", f.r_squared}};
}

// ---------------------------------------------------------------- gs-scaling

inline std::vector<int> gs_scaling_sizes(const ExperimentConfig& c) {
  auto s = get_ints(c, "sizes");
  if (!s.empty()) return s;
  const int dim = get_int(c, "dim");
  for (int n = dim == 2 ? 16 : 8; n <= (dim == 2 ? 4096 : 512); n *= 2) s.push_back(n);
  return s;
}

inline KindSpec gs_scaling() {
  KindSpec k;
  k.name = "gs-scaling";
  k.description = "Exact tie probability Prob(|H+| <= window) against N, with a log-log fit";
  k.params = {{"dim", std::int64_t{2}, "lattice dimension (2 or 3)"},
              {"sizes", Ints{}, "linear sizes; empty means 16..4096 (d=2) or 8..512 (d=3) by doubling"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"window", 0.0, "tie window on |H+|"}};
  k.validate = [](const ExperimentConfig& c) {
    const int dim = get_int(c, "dim", 2, 3);
    (void)dim;
    require(get_real(c, "window") >= 0, "window must be >= 0");
    const auto s = gs_scaling_sizes(c);
    require_increasing(s, "sizes");
    require(s.size() >= 5, "scaling fit needs at least five sizes");
    require(s.back() >= 50 * s.front(), "sizes must span a factor of at least 50");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    for (int n : gs_scaling_sizes(c)) t.push_back({t.size(), {{"n", n}}, derive_seed(c.master_seed, {"gs-scaling", n})});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const int dim = get_int(c, "dim");
    const auto n = t.key["n"].get<std::uint64_t>();
    return json{{"tie_probability", tie_probability_exact(dim, n, get_real(c, "j_prime"), get_real(c, "window"))}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    const int dim = get_int(c, "dim");
    CsvWriter csv({"N", "tie_probability"});
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const double p = res[i]["tie_probability"].get<double>();
      csv.row(tasks[i].key["n"].get<int>(), p);
      pts.emplace_back(tasks[i].key["n"].get<double>(), p);
    }
    Aggregate a;
    a.csv = csv.str();
    const double target = -(dim - 1) / 2.0;
    bool positive = true;
    for (auto& p : pts) positive = positive && p.second > 0;
    if (positive) {
      const auto f = fit_powerlaw(pts);
      a.summary = {{"fit", fit_json(f)}, {"target_slope", target}};
      a.checks.push_back(slope_check("tie-probability slope", f.slope, target, dim == 2 ? 0.03 : 0.05));
    } else {
      a.summary = {{"fit", nullptr}, {"target_slope", target}};
      a.checks.push_back({"tie-probability slope", false, "zero tie probability at some size; no fit"});
    }
    return a;
  };
  return k;
}

// ------------------------------------------------------------- gs-recurrence

inline std::vector<int> recurrence_checkpoints(const ExperimentConfig& c) {
  auto s = get_ints(c, "checkpoints");
  const int n_max = get_int(c, "n_max");
  if (s.empty()) {
    for (int dec = 1; dec <= n_max; dec *= 10)
      for (int m : {1, 2, 5})
        if (m * dec <= n_max) s.push_back(m * dec);
    if (s.back() != n_max) s.push_back(n_max);
  }
  return s;
}

inline KindSpec gs_recurrence() {
  KindSpec k;
  k.name = "gs-recurrence";
  k.description = "Mixed ground-state events along sparse (geometric) and full volume sequences, per boundary field";
  k.params = {{"dim", std::int64_t{2}, "lattice dimension"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"delta", 0.25, "selection threshold: mixed iff p+ in [delta, 1 - delta]"},
              {"seeds", std::int64_t{500}, "number of boundary fields"},
              {"base", 4.0, "sparse sequence N_k = base^k"},
              {"k_max", std::int64_t{7}, "last sparse index"},
              {"k_min", std::int64_t{3}, "a field is clean if no sparse index k >= k_min is mixed"},
              {"n_max", std::int64_t{2000}, "end of the full sequence 1..n_max"},
              {"checkpoints", Ints{}, "sizes at which the cumulative mixed count is recorded; empty means 1,2,5,10,..."},
              {"fit_min", std::int64_t{100}, "smallest checkpoint used in the cumulative-count fit"},
              {"clean_target", 0.9, "required clean fraction"},
              {"exponent_target", 0.5, "expected cumulative-count exponent"},
              {"exponent_tolerance", 0.1, "allowed deviation of the exponent"}};
  k.validate = [](const ExperimentConfig& c) {
    const int dim = get_int(c, "dim", 2, 3);
    const double d = get_real(c, "delta");
    require(d > 0 && d < 0.5, "delta must lie in (0, 1/2)");
    get_int(c, "seeds", 1);
    const int n_max = get_int(c, "n_max", 1);
    get_int(c, "k_min", 1);
    try {
      make_sequence(SequenceKind::geometric, get_real(c, "base"), get_int(c, "k_max", 1), dim);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sparse sequence: ") + e.what());
    }
    const auto cp = recurrence_checkpoints(c);
    require_increasing(cp, "checkpoints");
    require(cp.back() <= n_max, "checkpoints must not exceed n_max");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int n = get_int(c, "seeds");
    for (int s = 0; s < n; ++s) t.push_back({t.size(), {{"field", s}}, derive_seed(c.master_seed, {"gs-recurrence", s})});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const int dim = get_int(c, "dim");
    const double jp = get_real(c, "j_prime"), delta = get_real(c, "delta");
    const auto seq = make_sequence(SequenceKind::geometric, get_real(c, "base"), get_int(c, "k_max"), dim);
    json mixed_k = json::array();
    bool clean = true;
    for (std::size_t i = 0; i < seq.sizes.size(); ++i) {
      const long s = shell_sum(t.seed, dim, seq.sizes[i]);
      if (ground_state_outcome(jp * static_cast<double>(s), delta).classification == Classification::Mixed) {
        const int kk = static_cast<int>(i) + 1;
        mixed_k.push_back(kk);
        if (kk >= get_int(c, "k_min")) clean = false;
      }
    }
    const auto scan = recurrence_scan(t.seed, dim, jp, get_int(c, "n_max"), delta);
    json cumulative = json::array();
    long count = 0;
    std::size_t next = 0;
    const auto cp = recurrence_checkpoints(c);
    for (const auto& e : scan) {
      count += e.outcome.classification == Classification::Mixed;
      if (next < cp.size() && e.n == cp[next]) {
        cumulative.push_back(count);
        ++next;
      }
    }
    return json{{"sparse_mixed_k", mixed_k}, {"clean", clean}, {"cumulative_mixed", cumulative}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>&, const std::vector<json>& res) {
    const auto cp = recurrence_checkpoints(c);
    long clean = 0;
    std::vector<double> sum(cp.size(), 0.0);
    for (const auto& r : res) {
      clean += r["clean"].get<bool>();
      for (std::size_t i = 0; i < cp.size(); ++i) sum[i] += r["cumulative_mixed"][i].get<double>();
    }
    const double n = static_cast<double>(res.size());
    CsvWriter csv({"N", "mean_cumulative_mixed"});
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < cp.size(); ++i) {
      csv.row(cp[i], sum[i] / n);
      if (cp[i] >= get_int(c, "fit_min") && sum[i] > 0) pts.emplace_back(cp[i], sum[i] / n);
    }
    Aggregate a;
    a.csv = csv.str();
    const double frac = static_cast<double>(clean) / n;
    const auto ci = wilson_interval(clean, static_cast<long>(res.size()));
    a.summary = {{"fields", res.size()}, {"clean_fields", clean}, {"clean_fraction", frac}, {"clean_ci", {ci.low, ci.high}}};
    std::ostringstream o;
    o << "clean fraction " << frac << " (" << clean << "/" << res.size() << "), required >= " << get_real(c, "clean_target");
    a.checks.push_back({"sparse sequence clean fraction", frac >= get_real(c, "clean_target"), o.str()});
    if (pts.size() >= 3) {
      const auto f = fit_powerlaw(pts);
      a.summary["cumulative_fit"] = fit_json(f);
      a.checks.push_back(slope_check("full-sequence cumulative mixed exponent", f.slope, get_real(c, "exponent_target"),
                                     get_real(c, "exponent_tolerance")));
    } else {
      a.summary["cumulative_fit"] = nullptr;
      a.checks.push_back({"full-sequence cumulative mixed exponent", false, "fewer than three usable checkpoints"});
    }
    return a;
  };
  return k;
}

// ----------------------------------------------------------------- metastate

inline std::shared_ptr<const StateProvider> make_provider(const ExperimentConfig& c) {
  const auto& name = c.get<std::string>("provider");
  const int dim = get_int(c, "dim");
  if (name == "ground") return std::make_shared<GroundStateProvider>(dim, get_real(c, "j_prime"), get_real(c, "m_star"));
  if (name == "enumeration") return std::make_shared<EnumerationProvider>(dim, couplings(c), get_real(c, "fraction"));
  if (name == "transfer") return std::make_shared<TransferMatrixProvider>(couplings(c), get_real(c, "fraction"));
  if (name == "montecarlo")
    return std::make_shared<MonteCarloProvider>(dim, couplings(c), static_cast<std::size_t>(get_int(c, "sweeps")),
                                                geometric_ladder(get_int(c, "replicas"), get_real(c, "ladder_top")),
                                                get_real(c, "fraction"));
  throw ConfigError("unknown provider '" + name + "' (ground, enumeration, transfer, montecarlo)");
}

inline BoundaryKind metastate_boundary(const std::string& bc) {
  if (bc == "random") return BoundaryKind::symmetric_iid;
  if (bc == "free") return BoundaryKind::free;
  if (bc == "periodic") return BoundaryKind::periodic;
  if (bc == "plus") return BoundaryKind::all_plus;
  throw ConfigError("unknown bc '" + bc + "' (random, free, periodic, plus)");
}

inline Provenance metastate_provenance(const std::string& p) {
  if (p == "over-eta") return Provenance::over_eta;
  if (p == "over-volumes") return Provenance::over_volumes;
  throw ConfigError("unknown provenance '" + p + "' (over-eta, over-volumes)");
}

inline VolumeSequence metastate_sequence(const ExperimentConfig& c) {
  const auto& kind = c.get<std::string>("sequence");
  SequenceKind sk;
  if (kind == "full") sk = SequenceKind::full;
  else if (kind == "geometric") sk = SequenceKind::geometric;
  else if (kind == "polynomial") sk = SequenceKind::polynomial;
  else throw ConfigError("unknown sequence '" + kind + "' (full, geometric, polynomial)");
  try {
    return make_sequence(sk, get_real(c, "seq_parameter"), get_int(c, "k_max", 1), get_int(c, "dim"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sequence: ") + e.what());
  }
}

inline KindSpec metastate() {
  KindSpec k;
  k.name = "metastate";
  k.description = "Empirical metastate: clustered window descriptors over boundary fields or along a volume sequence";
  k.params = {{"provider", std::string("ground"), "state provider: ground, enumeration, transfer, montecarlo"},
              {"bc", std::string("random"), "boundary: random, free, periodic, plus"},
              {"provenance", std::string("over-eta"), "over-eta (fixed size) or over-volumes (fixed field)"},
              {"dim", std::int64_t{2}, "lattice dimension"},
              {"size", std::int64_t{256}, "linear size for over-eta"},
              {"samples", std::int64_t{10000}, "boundary fields for over-eta"},
              {"j", -1.0, "bulk coupling J"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"m_star", 0.9, "ground-state provider: pure iff |<s_0>| >= m_star"},
              {"fraction", 0.9, "finite-temperature providers: m* as a fraction of the all-plus <s_0>"},
              {"radius", 0.1, "clustering radius (max norm)"},
              {"sweeps", std::int64_t{20000}, "montecarlo provider sweeps"},
              {"replicas", std::int64_t{4}, "montecarlo provider ladder size"},
              {"ladder_top", 2.0, "montecarlo provider top temperature multiplier"},
              {"sequence", std::string("geometric"), "over-volumes sequence: full, geometric, polynomial"},
              {"seq_parameter", 4.0, "N_max (full), base (geometric) or power (polynomial)"},
              {"k_max", std::int64_t{7}, "last sparse index"},
              {"field", std::int64_t{0}, "over-volumes field index"},
              {"pure_mass_target", 0.95, "check: required pure mass (ground, random, over-eta)"},
              {"weight_tolerance", 0.015, "check: allowed deviation of each pure weight from 1/2"}};
  k.validate = [](const ExperimentConfig& c) {
    const int dim = get_int(c, "dim", 2, 3);
    const auto& prov = c.get<std::string>("provider");
    metastate_boundary(c.get<std::string>("bc"));
    const auto pv = metastate_provenance(c.get<std::string>("provenance"));
    require(get_real(c, "radius") > 0, "radius must be positive");
    require(prov != "transfer" || dim == 2, "transfer provider needs dim = 2");
    get_int(c, "size", 1);
    get_int(c, "field", 0);
    if (pv == Provenance::over_eta) require(get_int(c, "samples", 0) >= 1000, "over-eta needs at least 1000 samples");
    else metastate_sequence(c);
    if (prov == "montecarlo") {
      get_int(c, "sweeps", 10);
      get_int(c, "replicas", 1);
      require(get_real(c, "ladder_top") >= 1.0, "ladder_top must be >= 1");
    }
    (void)make_provider(c);
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    if (metastate_provenance(c.get<std::string>("provenance")) == Provenance::over_eta) {
      const int n = get_int(c, "samples");
      for (int s = 0; s < n; ++s) t.push_back({t.size(), {{"sample", s}}, metastate_eta_seed(c.master_seed, s)});
    } else {
      const auto seed = derive_seed(c.master_seed, {"metastate", "field", get_int(c, "field")});
      for (int n : metastate_sequence(c).sizes) t.push_back({t.size(), {{"size", n}}, seed});
    }
    return t;
  };
  k.prepare = [](const ExperimentConfig& c) { return std::any(make_provider(c)); };
  k.run = [](const ExperimentConfig& c, const std::any& ctx, const Task& t, int) {
    const auto& prov = *std::any_cast<const std::shared_ptr<const StateProvider>&>(ctx);
    const int n = t.key.contains("size") ? t.key["size"].get<int>() : get_int(c, "size");
    const BoundarySpec eta{metastate_boundary(c.get<std::string>("bc")), t.seed, false};
    return json{{"descriptor", prov.descriptor(n, eta)}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any& ctx, const std::vector<Task>& tasks, const std::vector<json>& res) {
    const auto& prov = *std::any_cast<const std::shared_ptr<const StateProvider>&>(ctx);
    const auto pv = metastate_provenance(c.get<std::string>("provenance"));
    std::vector<std::vector<double>> ds;
    for (const auto& r : res) ds.push_back(r["descriptor"].get<std::vector<double>>());
    const int n = pv == Provenance::over_eta ? get_int(c, "size") : tasks.back().key["size"].get<int>();
    const auto m = metastate_from_descriptors(pv, c.digest(), ds, prov, n, get_real(c, "radius"));

    std::vector<std::string> header{"atom", "weight", "n_visits", "classification"};
    for (std::size_t i = 0; i < ds[0].size(); ++i) header.push_back("d" + std::to_string(i));
    CsvWriter csv(header);
    double pure = 0;
    std::vector<double> pure_weights;
    for (std::size_t i = 0; i < m.atoms.size(); ++i) {
      const auto& at = m.atoms[i];
      std::vector<std::string> row{std::to_string(i), CsvWriter::cell(at.weight), std::to_string(at.visits),
                                   std::string(to_string(at.classification))};
      for (double x : at.descriptor) row.push_back(CsvWriter::cell(x));
      csv.row_strings(row);
      if (at.classification != StateClass::mixed) {
        pure += at.weight;
        pure_weights.push_back(at.weight);
      }
    }
    Aggregate a;
    a.csv = csv.str();
    a.summary = to_json(m);
    a.summary["pure_mass"] = m.pure_mass();
    json cond = json::array();
    for (double w : pure_weights) cond.push_back(pure > 0 ? w / pure : 0.0);
    a.summary["pure_weights_conditional"] = cond;

    // Checks apply to the random-boundary ground-state metastate over fields.
    if (c.get<std::string>("provider") == "ground" && c.get<std::string>("bc") == "random" && pv == Provenance::over_eta) {
      std::ostringstream o1, o2;
      o1 << pure_weights.size() << " pure atoms, pure mass " << m.pure_mass();
      a.checks.push_back({"two pure atoms", pure_weights.size() == 2 && m.pure_mass() >= get_real(c, "pure_mass_target"),
                          o1.str()});
      bool ok = pure_weights.size() == 2;
      o2 << "pure weights";
      for (std::size_t i = 0; i < pure_weights.size(); ++i) {
        const double w = pure_weights[i] / pure;
        ok = ok && std::abs(w - 0.5) <= get_real(c, "weight_tolerance");
        o2 << " " << w << " (raw " << pure_weights[i] << ")";
      }
      o2 << " given a pure state";
      a.checks.push_back({"pure atom weights 1/2", ok, o2.str()});
    }
    return a;
  };
  return k;
}

// ---------------------------------------------------------------- fe-survey

inline KindSpec fe_survey() {
  KindSpec k;
  k.name = "fe-survey";
  k.description = "Prob(|F+ - F-| <= threshold) per square width over random boundary fields";
  k.params = {{"widths", Ints{4, 6, 8, 10, 12}, "square widths (increasing)"},
              {"j", -1.2, "bulk coupling J"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"samples", std::int64_t{10000}, "boundary fields"},
              {"tau", 1.0, "fixed threshold"},
              {"use_epsilon", false, "use threshold W^epsilon instead of tau"},
              {"epsilon", 0.0, "threshold exponent when use_epsilon is set"},
              {"bound_exponent", 0.3, "check: Prob <= c W^-bound_exponent with c anchored at the smallest width"}};
  k.validate = [](const ExperimentConfig& c) {
    const auto w = get_ints(c, "widths", 1, max_resolved_transfer_width);
    require_increasing(w, "widths");
    get_int(c, "samples", 1);
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int n = get_int(c, "samples");
    for (int s = 0; s < n; ++s) t.push_back({t.size(), {{"sample", s}}, derive_seed(c.master_seed, {"fe-survey", s})});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    json deltas = json::array();
    for (int w : get_ints(c, "widths")) {
      const auto vol = build_volume(2, w);
      deltas.push_back(square_free_energies(w, couplings(c), sample_eta(vol, c.master_seed, "fe-survey", t.key["sample"].get<std::size_t>())).delta);
    }
    return json{{"delta", deltas}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>&, const std::vector<json>& res) {
    const auto widths = get_ints(c, "widths");
    std::vector<double> delta;
    for (const auto& r : res)
      for (const auto& d : r["delta"]) delta.push_back(d.get<double>());
    std::optional<double> eps;
    if (c.get<bool>("use_epsilon")) eps = get_real(c, "epsilon");
    const auto rows = fe_survey_rows(widths, delta, res.size(), get_real(c, "tau"), eps);
    CsvWriter csv({"W", "samples", "threshold", "hits", "probability", "ci_low", "ci_high", "mean_delta", "stderr_delta",
                   "tail_min_abs_delta"});
    for (const auto& r : rows)
      csv.row(r.size, r.samples, r.threshold, r.hits, r.probability, r.ci.low, r.ci.high, r.mean_delta, r.stderr_delta,
              r.tail_min_abs_delta);
    Aggregate a;
    a.csv = csv.str();
    const double b = get_real(c, "bound_exponent");
    const double cc = rows[0].probability * std::pow(rows[0].size, b);
    bool monotone = true, bounded = true;
    std::ostringstream om, ob;
    om << "P(W) =";
    ob << "c = " << cc << ", P(W) W^" << b << " =";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      om << " " << rows[i].probability;
      ob << " " << rows[i].probability * std::pow(rows[i].size, b);
      if (i > 0 && rows[i].probability > rows[i - 1].probability) monotone = false;
      if (rows[i].probability > cc * std::pow(rows[i].size, -b) * (1 + 1e-12)) bounded = false;
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
      if (r.probability > 0) pts.emplace_back(r.size, r.probability);
    a.summary = {{"c", cc}, {"bound_exponent", b}};
    a.summary["fit"] = pts.size() >= 3 ? fit_json(fit_powerlaw(pts)) : json(nullptr);
    a.checks.push_back({"probability non-increasing in W", monotone, om.str()});
    a.checks.push_back({"probability bounded by c W^-b", bounded, ob.str()});
    return a;
  };
  return k;
}

// ---------------------------------------------------------- restricted-probe

inline KindSpec restricted_probe() {
  KindSpec k;
  k.name = "restricted-probe";
  k.description = "Worst case over fields of the restricted-ensemble origin magnetization against the pure value";
  k.params = {{"sizes", Ints{3, 4, 5}, "square sizes"},
              {"j", -2.0, "bulk coupling J"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"samples", std::int64_t{100}, "boundary fields per size"},
              {"ratio", 2.0, "required -J / |J'|"},
              {"final_bound", 0.01, "check: worst plus deviation at the largest size"}};
  k.validate = [](const ExperimentConfig& c) {
    const auto s = get_ints(c, "sizes", 1, max_resolved_transfer_width);
    require_increasing(s, "sizes");
    get_int(c, "samples", 1);
    const auto cc = couplings(c);
    require(-cc.j >= get_real(c, "ratio") * std::abs(cc.j_prime) && -cc.j >= 1.5, "probe needs -J >= ratio * |J'| and -J >= 1.5");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    for (int n : get_ints(c, "sizes")) t.push_back({t.size(), {{"size", n}}, derive_seed(c.master_seed, {"restricted-probe", n})});
    return t;
  };
  k.inner_parallel = true;
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int workers) {
    ProbeParams p{{t.key["size"].get<int>()}, couplings(c), static_cast<std::size_t>(get_int(c, "samples")),
                  get_real(c, "ratio"), c.master_seed, workers};
    const auto r = restricted_convergence_probe(p).at(0);
    return json{{"pure_plus", r.pure_plus},   {"pure_minus", r.pure_minus}, {"worst_plus", r.worst_plus},
                {"worst_minus", r.worst_minus}, {"mean_plus", r.mean_plus},   {"mean_minus", r.mean_minus}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    CsvWriter csv({"size", "pure_plus", "pure_minus", "worst_plus", "worst_minus", "mean_plus", "mean_minus"});
    bool monotone = true;
    std::ostringstream o;
    o << "worst plus deviation:";
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& r = res[i];
      csv.row(tasks[i].key["size"].get<int>(), r["pure_plus"].get<double>(), r["pure_minus"].get<double>(),
              r["worst_plus"].get<double>(), r["worst_minus"].get<double>(), r["mean_plus"].get<double>(),
              r["mean_minus"].get<double>());
      o << " " << tasks[i].key["size"].get<int>() << ":" << r["worst_plus"].get<double>();
      if (i > 0 && !(r["worst_plus"].get<double>() < res[i - 1]["worst_plus"].get<double>())) monotone = false;
    }
    Aggregate a;
    a.csv = csv.str();
    const double last = res.back()["worst_plus"].get<double>();
    a.summary = {{"final_worst_plus", last}};
    a.checks.push_back({"worst deviation decreasing in size", monotone, o.str()});
    std::ostringstream o2;
    o2 << "worst plus deviation " << last << " at the largest size, bound " << get_real(c, "final_bound");
    a.checks.push_back({"worst deviation small at the largest size", last <= get_real(c, "final_bound"), o2.str()});
    return a;
  };
  return k;
}

// ------------------------------------------------------------ stacked-census

inline KindSpec stacked_census() {
  KindSpec k;
  k.name = "stacked-census";
  k.description = "Mixed-plane count in stacks of independent half-plane ground states";
  k.params = {{"sizes", Ints{64, 256, 1024}, "plane sizes N"},
              {"planes", std::int64_t{0}, "planes per stack; 0 means K = N"},
              {"deltas", Reals{0.1, 0.25, 0.4}, "selection thresholds"},
              {"realizations", std::int64_t{200}, "disorder realizations per size"},
              {"j", -1.0, "bulk coupling J"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"line_disorder", true, "random-sign line bonds through each origin column"},
              {"vertical", 0.0, "magnitude of random-sign couplings between adjacent planes"},
              {"count_exponent", 0.5, "check: expected count exponent"},
              {"fraction_exponent", -0.5, "check: expected fraction exponent"},
              {"exponent_tolerance", 0.1, "check: allowed deviation"}};
  k.validate = [](const ExperimentConfig& c) {
    require_increasing(get_ints(c, "sizes", 2), "sizes");
    get_int(c, "planes", 0);
    require(get_int(c, "realizations", 0) >= 2, "need at least two realizations");
    require(!c.get<Reals>("deltas").empty(), "deltas must not be empty");
    for (double d : c.get<Reals>("deltas")) require(d > 0 && d < 0.5, "deltas must lie in (0, 1/2)");
    require(get_real(c, "vertical") >= 0, "vertical must be >= 0");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int R = get_int(c, "realizations");
    for (int n : get_ints(c, "sizes"))
      for (int r = 0; r < R; ++r)
        t.push_back({t.size(), {{"size", n}, {"realization", r}}, stack_seed(c.master_seed, n, static_cast<std::size_t>(r))});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const int n = t.key["size"].get<int>();
    const int K = get_int(c, "planes") > 0 ? get_int(c, "planes") : n;
    const StackedModel m{K, n, couplings(c), c.get<bool>("line_disorder"), get_real(c, "vertical"), t.seed};
    const auto planes = stack_ground_state(m);
    json counts = json::array();
    for (double d : c.get<Reals>("deltas")) counts.push_back(mixture_count(planes, d));
    return json{{"counts", counts}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    const auto sizes = get_ints(c, "sizes");
    const auto& deltas = c.get<Reals>("deltas");
    std::map<int, std::vector<std::vector<double>>> counts;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto& v = counts[tasks[i].key["size"].get<int>()];
      v.resize(deltas.size());
      for (std::size_t d = 0; d < deltas.size(); ++d) v[d].push_back(res[i]["counts"][d].get<double>());
    }
    CsvWriter csv({"N", "K", "delta", "mean_count", "count_ci_low", "count_ci_high", "mean_fraction", "fraction_ci_low",
                   "fraction_ci_high"});
    std::vector<std::vector<CensusRow>> by_delta(deltas.size());
    for (int n : sizes) {
      const int K = get_int(c, "planes") > 0 ? get_int(c, "planes") : n;
      for (std::size_t d = 0; d < deltas.size(); ++d) {
        const auto row = census_row(n, K, deltas[d], counts[n][d]);
        by_delta[d].push_back(row);
        csv.row(row.size, row.planes, row.delta, row.mean_count, row.count_ci.low, row.count_ci.high, row.mean_fraction,
                row.fraction_ci.low, row.fraction_ci.high);
      }
    }
    Aggregate a;
    a.csv = csv.str();
    a.summary = {{"fits", json::array()}};
    const double tol = get_real(c, "exponent_tolerance");
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      std::vector<std::pair<double, double>> pc, pf;
      for (const auto& r : by_delta[d])
        if (r.mean_count > 0) {
          pc.emplace_back(r.size, r.mean_count);
          pf.emplace_back(r.size, r.mean_fraction);
        }
      const std::string tag = "delta=" + detail::format_real(deltas[d]);
      if (pc.size() < 3) {
        a.summary["fits"].push_back({{"delta", deltas[d]}, {"count", nullptr}, {"fraction", nullptr}});
        a.checks.push_back({"count exponent " + tag, false, "fewer than three sizes with mixed planes"});
        a.checks.push_back({"fraction exponent " + tag, false, "fewer than three sizes with mixed planes"});
        continue;
      }
      const auto fc = fit_powerlaw(pc), ff = fit_powerlaw(pf);
      a.summary["fits"].push_back({{"delta", deltas[d]}, {"count", fit_json(fc)}, {"fraction", fit_json(ff)}});
      a.checks.push_back(slope_check("count exponent " + tag, fc.slope, get_real(c, "count_exponent"), tol));
      a.checks.push_back(slope_check("fraction exponent " + tag, ff.slope, get_real(c, "fraction_exponent"), tol));
    }
    return a;
  };
  return k;
}

// ------------------------------------------------------------------- overlap

inline KindSpec overlap() {
  KindSpec k;
  k.name = "overlap";
  k.description = "Replica overlap distribution of stacked ground states";
  k.params = {{"sizes", Ints{64, 256, 1024}, "plane sizes N"},
              {"planes", std::int64_t{0}, "planes per stack; 0 means K = N"},
              {"delta", 0.25, "selection threshold"},
              {"realizations", std::int64_t{200}, "disorder realizations per size"},
              {"pairs", std::int64_t{100}, "replica pairs per realization"},
              {"bins", std::int64_t{40}, "histogram bins over [-1, 1]"},
              {"j", -1.0, "bulk coupling J"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"line_disorder", true, "random-sign line bonds through each origin column"},
              {"c_tolerance", 0.3, "check: relative spread of c = (1 - <q>) sqrt(N) across sizes"}};
  k.validate = [](const ExperimentConfig& c) {
    require_increasing(get_ints(c, "sizes", 2), "sizes");
    get_int(c, "planes", 0);
    require(get_int(c, "realizations", 0) >= 2, "need at least two realizations");
    get_int(c, "pairs", 1);
    get_int(c, "bins", 1);
    const double d = get_real(c, "delta");
    require(d > 0 && d < 0.5, "delta must lie in (0, 1/2)");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int R = get_int(c, "realizations");
    for (int n : get_ints(c, "sizes"))
      for (int r = 0; r < R; ++r)
        t.push_back({t.size(), {{"size", n}, {"realization", r}}, stack_seed(c.master_seed, n, static_cast<std::size_t>(r))});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const int n = t.key["size"].get<int>();
    const int K = get_int(c, "planes") > 0 ? get_int(c, "planes") : n;
    const bool ld = c.get<bool>("line_disorder");
    const StackedModel m{K, n, couplings(c), ld, 0.0, t.seed};
    Rng rng(overlap_seed(c.master_seed, n, t.key["realization"].get<std::size_t>()));
    const int pairs = get_int(c, "pairs");
    const auto qs = replica_overlaps(stack_ground_state(m), get_real(c, "delta"), pairs, n, ld, rng);
    std::vector<double> hist(static_cast<std::size_t>(get_int(c, "bins")));
    for (double q : qs) add_to_histogram(hist, q, 1.0 / pairs);
    return json{{"mean_q", mean(qs)}, {"histogram", hist}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    const int bins = get_int(c, "bins");
    std::map<int, std::pair<std::vector<double>, std::vector<std::vector<double>>>> per;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto& e = per[tasks[i].key["size"].get<int>()];
      e.first.push_back(res[i]["mean_q"].get<double>());
      e.second.push_back(res[i]["histogram"].get<std::vector<double>>());
    }
    std::vector<std::string> header{"N", "K", "mean_q", "stderr_q", "c"};
    for (int b = 0; b < bins; ++b) header.push_back("bin" + std::to_string(b));
    CsvWriter csv(header);
    std::vector<double> cs;
    json rows = json::array();
    for (int n : get_ints(c, "sizes")) {
      const int K = get_int(c, "planes") > 0 ? get_int(c, "planes") : n;
      const auto r = overlap_result(n, K, get_real(c, "delta"), per[n].first, per[n].second);
      const double cn = (1.0 - r.mean_q) * std::sqrt(static_cast<double>(n));
      cs.push_back(cn);
      std::vector<std::string> row{std::to_string(n), std::to_string(K), CsvWriter::cell(r.mean_q), CsvWriter::cell(r.stderr_q),
                                   CsvWriter::cell(cn)};
      for (double h : r.histogram) row.push_back(CsvWriter::cell(h));
      csv.row_strings(row);
      rows.push_back({{"N", n}, {"mean_q", r.mean_q}, {"stderr_q", r.stderr_q}, {"c", cn}});
    }
    Aggregate a;
    a.csv = csv.str();
    const double cbar = mean(cs);
    double spread = 0;
    for (double x : cs) spread = std::max(spread, std::abs(x / cbar - 1.0));
    a.summary = {{"sizes", rows}, {"c_mean", cbar}, {"c_max_relative_spread", spread}};
    std::ostringstream o;
    o << "c =";
    for (double x : cs) o << " " << x;
    o << ", max relative spread " << spread;
    a.checks.push_back({"overlap deficit scales as c/sqrt(N)", cbar > 0 && spread <= get_real(c, "c_tolerance"), o.str()});
    return a;
  };
  return k;
}

// -------------------------------------------------------------- gauge-check

inline KindSpec gauge_check_kind() {
  KindSpec k;
  k.name = "gauge-check";
  k.description = "Mattis gauge equivalence of window expectations on enumerable volumes";
  k.params = {{"sizes", Ints{3, 4}, "square sizes (at most 5)"},
              {"instances", std::int64_t{50}, "random (tau, eta) pairs per size"},
              {"j", -1.3, "bulk coupling J"},
              {"j_prime", -0.8, "boundary coupling J'"},
              {"tolerance", 1e-12, "check: maximal window deviation"}};
  k.validate = [](const ExperimentConfig& c) {
    require_increasing(get_ints(c, "sizes", 1, 5), "sizes");
    get_int(c, "instances", 1);
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int I = get_int(c, "instances");
    for (int n : get_ints(c, "sizes"))
      for (int s = 0; s < I; ++s) t.push_back({t.size(), {{"size", n}, {"instance", s}}, derive_seed(c.master_seed, {"gauge-check", n, s})});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const auto vol = build_volume(2, t.key["size"].get<int>());
    const auto eta = sample_boundary(vol, BoundaryKind::symmetric_iid, derive_seed(t.seed, {"eta"}));
    return json{{"deviation", gauge_check(vol, couplings(c), eta, random_gauge(vol, derive_seed(t.seed, {"tau"})))}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    std::map<int, std::pair<int, double>> per;
    double worst = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto& e = per[tasks[i].key["size"].get<int>()];
      ++e.first;
      e.second = std::max(e.second, res[i]["deviation"].get<double>());
      worst = std::max(worst, e.second);
    }
    CsvWriter csv({"size", "instances", "max_deviation"});
    for (const auto& [n, e] : per) csv.row(n, e.first, e.second);
    Aggregate a;
    a.csv = csv.str();
    a.summary = {{"max_deviation", worst}};
    std::ostringstream o;
    o << "max deviation " << worst << ", tolerance " << get_real(c, "tolerance");
    a.checks.push_back({"gauge equivalence", worst <= get_real(c, "tolerance"), o.str()});
    return a;
  };
  return k;
}

// -------------------------------------------------------------------- oracle

struct OracleInstance {
  int width, height;
  Couplings couplings;
  std::uint64_t eta_seed;
};

/// Instance 0 is always the largest box.
inline OracleInstance oracle_instance(const ExperimentConfig& c, const Task& t) {
  Rng rng(t.seed);
  const int wmax = get_int(c, "max_width"), hmax = get_int(c, "max_height");
  OracleInstance in{wmax, hmax, {}, 0};
  if (t.index > 0) {
    in.width = 2 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(wmax - 1)));
    in.height = 2 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hmax - 1)));
  }
  const double jlo = get_real(c, "j_min"), jhi = get_real(c, "j_max"), jp = get_real(c, "j_prime_max");
  in.couplings.j = jlo + (jhi - jlo) * uniform01(rng);
  in.couplings.j_prime = jp * (2.0 * uniform01(rng) - 1.0);
  in.eta_seed = rng();
  return in;
}

inline KindSpec oracle() {
  KindSpec k;
  k.name = "oracle";
  k.description = "Enumeration against transfer matrix on random boxes, plus the plus/minus decomposition identity";
  k.params = {{"instances", std::int64_t{50}, "random boxes"},
              {"max_width", std::int64_t{3}, "largest width"},
              {"max_height", std::int64_t{12}, "largest height"},
              {"j_min", -2.0, "smallest J"},
              {"j_max", -0.3, "largest J"},
              {"j_prime_max", 1.5, "J' uniform in [-j_prime_max, j_prime_max]"},
              {"tolerance", 1e-12, "check: relative Z difference and decomposition deviation"}};
  k.validate = [](const ExperimentConfig& c) {
    get_int(c, "instances", 1);
    const int w = get_int(c, "max_width", 2, 12), h = get_int(c, "max_height", 2);
    require(w * h <= 48 && (w * (h / 2)) <= 24 && (w * (h - h / 2)) <= 24, "largest box exceeds split-enumeration limits");
    require(get_real(c, "j_min") <= get_real(c, "j_max"), "j_min must not exceed j_max");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int I = get_int(c, "instances");
    for (int s = 0; s < I; ++s) t.push_back({t.size(), {{"instance", s}}, derive_seed(c.master_seed, {"oracle", s})});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const auto in = oracle_instance(c, t);
    const auto vol = Volume::box({in.width, in.height});
    const auto eta = sample_boundary(vol, BoundaryKind::symmetric_iid, in.eta_seed);
    const auto model = make_model(vol, in.couplings, eta);
    // One enumeration serves both Z and the decomposition when it fits.
    double lz_e = 0;
    json dec = nullptr;
    if (vol.num_sites() <= max_enumeration_sites) {
      const auto e = enumerate(model, canonical_window(vol));
      lz_e = e.full.log_z;
      dec = decompose(e).max_deviation;
    } else {
      lz_e = log_partition_function(model);
    }
    const double lz_t = transfer_matrix(model, {}, false).log_z;
    return json{{"width", in.width},
                {"height", in.height},
                {"j", in.couplings.j},
                {"j_prime", in.couplings.j_prime},
                {"log_z_enum", lz_e},
                {"log_z_tm", lz_t},
                {"relative_difference", std::abs(std::expm1(lz_e - lz_t))},
                {"decomposition_deviation", dec}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    CsvWriter csv({"instance", "width", "height", "j", "j_prime", "log_z_enum", "log_z_tm", "relative_difference",
                   "decomposition_deviation"});
    double rel = 0, dec = 0;
    int dec_n = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& r = res[i];
      rel = std::max(rel, r["relative_difference"].get<double>());
      std::string d;
      if (!r["decomposition_deviation"].is_null()) {
        dec = std::max(dec, r["decomposition_deviation"].get<double>());
        ++dec_n;
        d = CsvWriter::cell(r["decomposition_deviation"].get<double>());
      }
      csv.row_strings({std::to_string(tasks[i].index), std::to_string(r["width"].get<int>()), std::to_string(r["height"].get<int>()),
                       CsvWriter::cell(r["j"].get<double>()), CsvWriter::cell(r["j_prime"].get<double>()),
                       CsvWriter::cell(r["log_z_enum"].get<double>()), CsvWriter::cell(r["log_z_tm"].get<double>()),
                       CsvWriter::cell(r["relative_difference"].get<double>()), d});
    }
    Aggregate a;
    a.csv = csv.str();
    const double tol = get_real(c, "tolerance");
    a.summary = {{"max_relative_difference", rel}, {"max_decomposition_deviation", dec}, {"decomposition_instances", dec_n}};
    std::ostringstream o1, o2;
    o1 << "max relative Z difference " << rel << " over " << res.size() << " instances";
    o2 << "max decomposition deviation " << dec << " over " << dec_n << " enumeration instances";
    a.checks.push_back({"enumeration matches transfer matrix", rel <= tol, o1.str()});
    a.checks.push_back({"decomposition identity", dec_n > 0 && dec <= tol, o2.str()});
    return a;
  };
  return k;
}

// ------------------------------------------------------------------ mc-check

inline KindSpec mc_check() {
  KindSpec k;
  k.name = "mc-check";
  k.description = "Replica-exchange heat bath against transfer-matrix window expectations";
  k.params = {{"instances", std::int64_t{20}, "random boundary fields"},
              {"size", std::int64_t{10}, "square size"},
              {"j", -1.2, "bulk coupling J"},
              {"j_prime", -1.0, "boundary coupling J'"},
              {"sweeps", std::int64_t{60000}, "sweeps per chain"},
              {"burnin", std::int64_t{6000}, "burn-in sweeps"},
              {"replicas", std::int64_t{8}, "ladder size"},
              {"ladder_top", 3.0, "top temperature multiplier"},
              {"sigma", 4.0, "check: allowed deviation in standard errors"}};
  k.validate = [](const ExperimentConfig& c) {
    get_int(c, "instances", 1);
    get_int(c, "size", 1, max_transfer_width);
    require(get_int(c, "burnin", 0) < get_int(c, "sweeps", 64), "burnin must be shorter than the run");
    get_int(c, "replicas", 1);
    require(get_real(c, "ladder_top") >= 1.0, "ladder_top must be >= 1");
  };
  k.tasks = [](const ExperimentConfig& c) {
    std::vector<Task> t;
    const int I = get_int(c, "instances");
    for (int s = 0; s < I; ++s) t.push_back({t.size(), {{"instance", s}}, derive_seed(c.master_seed, {"mc-check", s})});
    return t;
  };
  k.run = [](const ExperimentConfig& c, const std::any&, const Task& t, int) {
    const auto vol = build_volume(2, get_int(c, "size"));
    const auto eta = sample_boundary(vol, BoundaryKind::symmetric_iid, derive_seed(t.seed, {"eta"}));
    const auto window = canonical_window(vol);
    const auto exact = transfer_matrix(vol, couplings(c), eta, window, false);
    ChainConfig cfg{vol,
                    couplings(c),
                    eta,
                    static_cast<std::size_t>(get_int(c, "sweeps")),
                    static_cast<std::size_t>(get_int(c, "burnin")),
                    1,
                    derive_seed(t.seed, {"chain"}),
                    geometric_ladder(get_int(c, "replicas"), get_real(c, "ladder_top"))};
    const auto mc = run_chain(cfg, window);
    json mean = json::array(), se = json::array(), ex = json::array();
    double zmax = 0;
    for (std::size_t i = 0; i < window.size(); ++i) {
      const double d = std::abs(mc.estimates[i].mean - exact.expectations[i]);
      const double z = mc.estimates[i].stderr_ > 0 ? d / mc.estimates[i].stderr_ : (d < 1e-12 ? 0.0 : HUGE_VAL);
      zmax = std::max(zmax, z);
      mean.push_back(mc.estimates[i].mean);
      se.push_back(mc.estimates[i].stderr_);
      ex.push_back(exact.expectations[i]);
    }
    return json{{"mc", mean}, {"stderr", se}, {"exact", ex}, {"max_z", zmax}, {"swap_acceptance", mc.swap_acceptance}};
  };
  k.aggregate = [](const ExperimentConfig& c, const std::any&, const std::vector<Task>& tasks, const std::vector<json>& res) {
    CsvWriter csv({"instance", "observable", "mc", "stderr", "exact", "z"});
    double zmax = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& r = res[i];
      for (std::size_t o = 0; o < r["mc"].size(); ++o) {
        const double m = r["mc"][o].get<double>(), s = r["stderr"][o].get<double>(), e = r["exact"][o].get<double>();
        csv.row(tasks[i].index, o, m, s, e, s > 0 ? std::abs(m - e) / s : 0.0);
      }
      zmax = std::max(zmax, r["max_z"].get<double>());
    }
    Aggregate a;
    a.csv = csv.str();
    a.summary = {{"max_z", zmax}};
    std::ostringstream o;
    o << "max |mc - exact| / stderr = " << zmax << ", allowed " << get_real(c, "sigma");
    a.checks.push_back({"monte carlo matches transfer matrix", zmax <= get_real(c, "sigma"), o.str()});
    return a;
  };
  return k;
}

}  // namespace kinds

inline const std::vector<KindSpec>& experiment_kinds() {
  static const std::vector<KindSpec> all{kinds::gs_scaling(),     kinds::gs_recurrence(),    kinds::metastate(),
                                         kinds::fe_survey(),      kinds::restricted_probe(), kinds::stacked_census(),
                                         kinds::overlap(),        kinds::gauge_check_kind(), kinds::oracle(),
                                         kinds::mc_check()};
  return all;
}

inline const KindSpec& find_kind(const std::string& name) {
  for (const auto& k : experiment_kinds())
    if (k.name == name) return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

/// Resolves the kind from the configuration and runs it.
inline RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  return run_experiment(cfg, find_kind(cfg.kind), opt);
}

}  // namespace rbc

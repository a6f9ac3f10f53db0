#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rbc/metastate.hpp"

using namespace rbc;

namespace {

double weight_sum(const EmpiricalMetastate& m) {
  double s = 0;
  for (const auto& a : m.atoms) s += a.weight;
  return s;
}

void expect_separated(const std::vector<Atom>& atoms, double r) {
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::size_t b = a + 1; b < atoms.size(); ++b)
      EXPECT_GT(max_norm_distance(atoms[a].descriptor, atoms[b].descriptor), r);
}

}  // namespace

TEST(Sequence, Examples) {
  auto g = make_sequence(SequenceKind::geometric, 4, 7, 2);
  EXPECT_EQ(g.sizes, (std::vector<int>{4, 16, 64, 256, 1024, 4096, 16384}));
  auto f = make_sequence(SequenceKind::full, 10, 0, 2);
  std::vector<int> ten(10);
  std::iota(ten.begin(), ten.end(), 1);
  EXPECT_EQ(f.sizes, ten);
  auto p = make_sequence(SequenceKind::polynomial, 4, 6, 2);
  EXPECT_EQ(p.sizes, (std::vector<int>{1, 16, 81, 256, 625, 1296}));
}

TEST(Sequence, SummabilityGate) {
  // Independent tail bound: sum_{k > K} k^{-2} <= 1/K.
  auto p = make_sequence(SequenceKind::polynomial, 4, 6, 2);
  EXPECT_TRUE(is_summable(p));
  EXPECT_NEAR(summability_tail_bound(p), 1.0 / 6.0, 1e-12);
  double partial = 0;
  for (int k = 7; k < 2000000; ++k) partial += 1.0 / (double(k) * k);
  EXPECT_LE(partial, summability_tail_bound(p));

  for (int d : {2, 3}) {
    EXPECT_TRUE(is_summable(make_sequence(SequenceKind::geometric, 4, 7, d)));
    EXPECT_TRUE(is_summable(make_sequence(SequenceKind::geometric, 2, 10, d)));
    EXPECT_FALSE(is_summable(make_sequence(SequenceKind::full, 50, 0, d)));
  }
  // k^2 in d = 2 gives sum 1/k: divergent.
  EXPECT_THROW(make_sequence(SequenceKind::polynomial, 2, 5, 2), std::invalid_argument);
  EXPECT_NO_THROW(make_sequence(SequenceKind::polynomial, 2, 5, 3));
  EXPECT_THROW(make_sequence(SequenceKind::geometric, -2, 5, 2), std::invalid_argument);
  EXPECT_THROW(make_sequence(SequenceKind::geometric, 4, 5, 4), std::invalid_argument);
}

TEST(GroundStateProvider, BoundarySumMatchesExplicitShell) {
  for (int d : {2, 3})
    for (int n : {1, 2, 5, 8})
      for (std::uint64_t seed : {1u, 7u, 99u}) {
        const auto vol = build_volume(d, n);
        GroundStateProvider gp(d, -1.0);
        for (auto kind : {BoundaryKind::symmetric_iid, BoundaryKind::all_plus, BoundaryKind::dobrushin})
          for (bool neg : {false, true}) {
            const BoundarySpec spec{kind, seed, neg};
            long s = 0;
            for (auto v : spec.on(vol).values) s += v;
            EXPECT_EQ(gp.boundary_sum(n, spec), s);
          }
      }
}

TEST(GroundStateProvider, ClassificationAgreesWithOutcomeAtEverySize) {
  const auto seq = make_sequence(SequenceKind::geometric, 4, 7, 2);
  for (double jp : {-1.0, -0.3}) {
    const double delta = 0.25;
    GroundStateProvider gp(2, jp, 0.9, delta);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const BoundarySpec eta{BoundaryKind::symmetric_iid, derive_seed(3, {"agree", s}), false};
      const auto t = track_limit_points(eta, seq, gp);
      ASSERT_EQ(t.visits.size(), seq.sizes.size());
      for (const auto& v : t.visits) {
        const auto o = gp.outcome(v.size, eta, delta);
        const StateClass expect = o.classification == Classification::Plus    ? StateClass::plus_like
                                  : o.classification == Classification::Minus ? StateClass::minus_like
                                                                              : StateClass::mixed;
        EXPECT_EQ(v.classification, expect);
        EXPECT_DOUBLE_EQ(v.descriptor[0], o.p_plus - o.p_minus);
      }
    }
  }
}

TEST(TrackLimitPoints, AllPlusSinglePlusAtom) {
  const auto seq = make_sequence(SequenceKind::geometric, 4, 7, 2);
  GroundStateProvider gp(2, -1.0);
  const auto t = track_limit_points({BoundaryKind::all_plus, 0, false}, seq, gp);
  ASSERT_EQ(t.atoms.size(), 1u);
  EXPECT_EQ(t.atoms[0].classification, StateClass::plus_like);
  EXPECT_EQ(t.atoms[0].visits, seq.sizes.size());
  EXPECT_EQ(t.mixed_visits(), 0u);

  EnumerationProvider ep(2, {-1.5, -1.0});
  const auto small = make_sequence(SequenceKind::full, 4, 0, 2);
  const auto te = track_limit_points({BoundaryKind::all_plus, 0, false}, small, ep);
  for (const auto& v : te.visits) EXPECT_EQ(v.classification, StateClass::plus_like) << v.size;
}

TEST(TrackLimitPoints, SparseSequenceRarelyMixed) {
  // Exact oracle: along 4^k the ground state is mixed only on a tie of the
  // shell sum; P(tie) = C(4N, 2N) / 2^{4N} summed over k >= 3 is about 0.093.
  const auto seq = make_sequence(SequenceKind::geometric, 4, 7, 2);
  GroundStateProvider gp(2, -1.0);
  double expected_any = 1.0;
  for (int k = 2; k < 7; ++k) expected_any *= 1.0 - tie_probability_exact(2, seq.sizes[k], -1.0, 0.0);
  int clean = 0;
  const int seeds = 500;
  for (int s = 0; s < seeds; ++s) {
    const auto t = track_limit_points({BoundaryKind::symmetric_iid, derive_seed(11, {"sparse", s}), false}, seq, gp);
    clean += t.mixed_visits(seq.sizes[2]) == 0;
  }
  const double frac = double(clean) / seeds;
  const double sd = std::sqrt(expected_any * (1 - expected_any) / seeds);
  EXPECT_NEAR(frac, expected_any, 4 * sd);
}

TEST(TrackLimitPoints, FullSequenceMixedVisitsGrowLikeSqrt) {
  GroundStateProvider gp(2, -1.0);
  const auto seq = make_sequence(SequenceKind::full, 2000, 0, 2);
  std::vector<double> cum(seq.sizes.size(), 0.0);
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    const auto t = track_limit_points({BoundaryKind::symmetric_iid, derive_seed(5, {"full", s}), false}, seq, gp);
    double c = 0;
    for (std::size_t k = 0; k < t.visits.size(); ++k) {
      c += t.visits[k].classification == StateClass::mixed;
      cum[k] += c / seeds;
    }
  }
  std::vector<std::pair<double, double>> pts;
  for (int n = 100; n <= 2000; n *= 2) pts.emplace_back(n, cum[n - 1]);
  const auto fit = fit_powerlaw(pts);
  EXPECT_NEAR(fit.slope, 0.5, 0.1);
}

TEST(EmpiricalMetastate, GroundStateOverEtaTwoAtoms) {
  GroundStateProvider gp(2, -1.0);
  OverEtaParams p;
  p.size = 256;
  p.samples = 4000;
  p.master_seed = 1;
  const auto m = empirical_metastate(p, gp);
  EXPECT_NEAR(weight_sum(m), 1.0, 1e-12);
  expect_separated(m.atoms, p.radius);
  int pure = 0;
  const double tie = tie_probability_exact(2, 256, -1.0, 0.0);
  for (const auto& a : m.atoms) {
    if (a.classification == StateClass::mixed) continue;
    ++pure;
    EXPECT_NEAR(a.weight, 0.5 * (1 - tie), 4 * std::sqrt(0.25 / p.samples));
  }
  EXPECT_EQ(pure, 2);
  EXPECT_NEAR(m.unclustered_mass, tie, 4 * std::sqrt(tie / p.samples));
  EXPECT_LE(m.unclustered_mass, 0.05);
}

TEST(EmpiricalMetastate, AllPlusSingleAtom) {
  GroundStateProvider gp(2, -1.0);
  OverEtaParams p;
  p.size = 64;
  p.samples = 50;
  p.kind = BoundaryKind::all_plus;
  const auto m = empirical_metastate(p, gp);
  ASSERT_EQ(m.atoms.size(), 1u);
  EXPECT_EQ(m.atoms[0].weight, 1.0);
  EXPECT_EQ(m.atoms[0].classification, StateClass::plus_like);
}

TEST(EmpiricalMetastate, FreeBoundaryTransferMatrixSingleZeroAtom) {
  TransferMatrixProvider tp({-1.5, 0.0});
  OverEtaParams p;
  p.size = 10;
  p.samples = 8;
  p.kind = BoundaryKind::free;
  const auto m = empirical_metastate(p, tp);
  ASSERT_EQ(m.atoms.size(), 1u);
  EXPECT_NEAR(m.atoms[0].descriptor[0], 0.0, 1e-12);
  EXPECT_EQ(m.atoms[0].classification, StateClass::mixed);
  EXPECT_NEAR(m.unclustered_mass, 1.0, 1e-12);

  // Random boundary at the same size and couplings: almost all mass sits in
  // pure atoms away from the free-boundary atom. A rare near-balanced field
  // can still land next to it at this size.
  TransferMatrixProvider rp({-1.5, -1.0});
  OverEtaParams q = p;
  q.kind = BoundaryKind::symmetric_iid;
  q.samples = 100;
  const auto r = empirical_metastate(q, rp);
  EXPECT_LE(r.unclustered_mass, 0.1);
  const auto cmp = compare_metastates(r, m, 0.1);
  EXPECT_LE(cmp.matches.size(), 1u);
  EXPECT_GE(cmp.unmatched_mass_a, 0.9);
}

TEST(EmpiricalMetastate, SpinFlipEquivariance) {
  auto mirrored = [](const EmpiricalMetastate& a, const EmpiricalMetastate& b) {
    ASSERT_EQ(a.atoms.size(), b.atoms.size());
    for (std::size_t k = 0; k < a.atoms.size(); ++k) {
      EXPECT_EQ(a.atoms[k].weight, b.atoms[k].weight);
      EXPECT_EQ(a.atoms[k].descriptor[0], -b.atoms[k].descriptor[0]);
      for (std::size_t c = 1; c < a.atoms[k].descriptor.size(); ++c)
        EXPECT_EQ(a.atoms[k].descriptor[c], b.atoms[k].descriptor[c]);
    }
    EXPECT_EQ(a.unclustered_mass, b.unclustered_mass);
  };
  {
    GroundStateProvider gp(3, -1.0);
    OverEtaParams p;
    p.size = 12;
    p.samples = 1000;
    auto a = empirical_metastate(p, gp);
    p.negate = true;
    mirrored(a, empirical_metastate(p, gp));
  }
  {
    EnumerationProvider ep(2, {-1.0, -0.5});
    OverEtaParams p;
    p.size = 3;
    p.samples = 200;
    p.radius = 0.02;
    auto a = empirical_metastate(p, ep);
    EXPECT_GT(a.atoms.size(), 2u);
    p.negate = true;
    mirrored(a, empirical_metastate(p, ep));
  }
}

TEST(EmpiricalMetastate, DeterministicAcrossWorkers) {
  EnumerationProvider ep(2, {-1.0, -1.0});
  OverEtaParams p;
  p.size = 4;
  p.samples = 300;
  p.radius = 0.05;
  p.workers = 1;
  const auto a = to_json(empirical_metastate(p, ep)).dump();
  p.workers = 4;
  const auto b = to_json(empirical_metastate(p, ep)).dump();
  EXPECT_EQ(a, b);
}

TEST(EmpiricalMetastate, OverVolumesAgreesWithOverEta) {
  GroundStateProvider gp(2, -1.0);
  OverEtaParams p;
  p.size = 256;
  p.samples = 2000;
  const auto eta_avg = empirical_metastate(p, gp);
  const auto seq = make_sequence(SequenceKind::full, 2000, 0, 2);
  const auto vol_avg = empirical_metastate(BoundarySpec{BoundaryKind::symmetric_iid, 77, false}, seq, gp);
  EXPECT_EQ(vol_avg.provenance, Provenance::over_volumes);
  EXPECT_NEAR(weight_sum(vol_avg), 1.0, 1e-12);
  expect_separated(vol_avg.atoms, 0.1);
  const auto cmp = compare_metastates(eta_avg, vol_avg, 0.1);
  EXPECT_EQ(cmp.matches.size(), 3u);
  for (const auto& mt : cmp.matches)
    if (eta_avg.atoms[mt.a].classification != StateClass::mixed) EXPECT_LE(std::abs(mt.weight_difference), 0.1);
}

TEST(CompareMetastates, Bookkeeping) {
  EmpiricalMetastate a;
  a.atoms = {{{1.0, 1.0, 1.0}, 0.5, 50, StateClass::plus_like}, {{-1.0, 1.0, 1.0}, 0.5, 50, StateClass::minus_like}};
  const auto same = compare_metastates(a, a, 0.1);
  EXPECT_EQ(same.matches.size(), 2u);
  EXPECT_EQ(same.max_weight_difference, 0.0);
  EXPECT_EQ(same.unmatched_mass_a, 0.0);

  auto b = a;
  const double eps = 0.03;
  b.atoms[0].weight += eps;
  b.atoms[1].weight -= eps;
  const auto d = compare_metastates(a, b, 0.1);
  EXPECT_NEAR(d.max_weight_difference, eps, 1e-15);
  for (const auto& mt : d.matches) EXPECT_NEAR(std::abs(mt.weight_difference), eps, 1e-15);

  auto c = a;
  c.atoms[1].descriptor[0] = 0.0;
  const auto u = compare_metastates(a, c, 0.1);
  EXPECT_EQ(u.matches.size(), 1u);
  EXPECT_EQ(u.unmatched_mass_a, 0.5);
  EXPECT_EQ(u.unmatched_mass_b, 0.5);
}

TEST(Metastate, JsonShape) {
  GroundStateProvider gp(2, -1.0);
  OverEtaParams p;
  p.size = 16;
  p.samples = 200;
  const auto j = to_json(empirical_metastate(p, gp));
  EXPECT_EQ(j["provenance"], "over-eta");
  EXPECT_EQ(j["params_digest"].get<std::string>().size(), 16u);
  ASSERT_TRUE(j["atoms"].is_array());
  for (const auto& a : j["atoms"]) {
    EXPECT_TRUE(a.contains("descriptor"));
    EXPECT_TRUE(a.contains("weight"));
    EXPECT_TRUE(a.contains("n_visits"));
  }
  EXPECT_TRUE(j.contains("unclustered_mass"));
  p.samples = 201;
  EXPECT_NE(to_json(empirical_metastate(p, gp))["params_digest"], j["params_digest"]);
}

TEST(Cluster, MergesDriftedCentroids) {
  // 0.0 opens atom A, 0.09 joins A (centroid 0.045), 0.2 opens B, 0.12 joins
  // A (centroid 0.07); B at 0.2 is then more than 0.1 away: two atoms.
  std::vector<std::vector<double>> ds{{0.0}, {0.09}, {0.2}, {0.12}};
  auto atoms = detail::cluster(ds, 0.1);
  ASSERT_EQ(atoms.size(), 2u);
  EXPECT_EQ(atoms[0].visits + atoms[1].visits, 4u);
  // 0.0, 0.15, 0.1, 0.1: A drifts to 0.0667 while B stays at 0.15; their
  // distance 0.083 triggers a merge.
  std::vector<std::vector<double>> es{{0.0}, {0.15}, {0.1}, {0.1}};
  auto merged = detail::cluster(es, 0.1);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_NEAR(merged[0].descriptor[0], 0.0875, 1e-15);
}

TEST(MonteCarloProvider, AgreesWithEnumerationOnSmallBox) {
  const Couplings c{-1.0, -1.0};
  MonteCarloProvider mp(2, c, 20000, geometric_ladder(4, 2.0));
  EnumerationProvider ep(2, c);
  const BoundarySpec eta{BoundaryKind::symmetric_iid, 17, false};
  const auto a = mp.descriptor(3, eta);
  const auto b = ep.descriptor(3, eta);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 0.05) << k;
  EXPECT_NEAR(mp.threshold(3), ep.threshold(3), 0.05);
  EXPECT_GT(ep.threshold(3), 0.5);
}

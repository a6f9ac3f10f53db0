#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "rbc/exact/contours.hpp"
#include "rbc/exact/enumeration.hpp"
#include "rbc/exact/free_energy.hpp"
#include "rbc/exact/surveys.hpp"
#include "rbc/exact/transfer_matrix.hpp"

namespace rbc {
namespace {

// Slow contour labelling on explicit graphs, written independently of the
// bitmask classifier: dual edges as vertex pairs, contours by BFS over
// shared vertices, regions by BFS over sites not separated by the contour.
EnsembleLabel slow_label(const std::vector<int>& s, int w, int h, int origin) {
  using V = std::pair<int, int>;
  using E = std::pair<V, V>;
  std::vector<E> edges;
  std::map<E, std::pair<int, int>> sites_of;  // the two sites a dual edge separates
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w && s[x + w * y] != s[x + 1 + w * y]) {
        E e{{x + 1, y}, {x + 1, y + 1}};
        edges.push_back(e);
        sites_of[e] = {x + w * y, x + 1 + w * y};
      }
      if (y + 1 < h && s[x + w * y] != s[x + w * (y + 1)]) {
        E e{{x, y + 1}, {x + 1, y + 1}};
        edges.push_back(e);
        sites_of[e] = {x + w * y, x + w * (y + 1)};
      }
    }
  auto majority = [&] {
    int m = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) m += s[x + w * y];
    if (m == 0) return s[origin] > 0 ? EnsembleLabel::Plus : EnsembleLabel::Minus;
    return m > 0 ? EnsembleLabel::Plus : EnsembleLabel::Minus;
  };
  if (edges.empty()) return s[0] > 0 ? EnsembleLabel::Plus : EnsembleLabel::Minus;

  std::vector<int> comp(edges.size(), -1);
  int nc = 0;
  for (std::size_t a = 0; a < edges.size(); ++a) {
    if (comp[a] >= 0) continue;
    std::queue<std::size_t> q;
    q.push(a);
    comp[a] = nc;
    while (!q.empty()) {
      auto e = edges[q.front()];
      q.pop();
      for (std::size_t b = 0; b < edges.size(); ++b) {
        if (comp[b] >= 0) continue;
        auto f = edges[b];
        if (f.first == e.first || f.first == e.second || f.second == e.first || f.second == e.second) {
          comp[b] = nc;
          q.push(b);
        }
      }
    }
    ++nc;
  }
  const std::set<int> corners{0, w - 1, w * (h - 1), w * h - 1};
  std::vector<bool> sea(w * h, true);
  for (int c = 0; c < nc; ++c) {
    std::set<std::pair<int, int>> cut;
    for (std::size_t a = 0; a < edges.size(); ++a)
      if (comp[a] == c) {
        auto p = sites_of[edges[a]];
        cut.insert(p);
        cut.insert({p.second, p.first});
      }
    std::vector<int> region(w * h, -1);
    int nr = 0;
    for (int start = 0; start < w * h; ++start) {
      if (region[start] >= 0) continue;
      std::queue<int> q;
      q.push(start);
      region[start] = nr;
      while (!q.empty()) {
        int i = q.front();
        q.pop();
        int x = i % w, y = i / w;
        std::vector<int> nb;
        if (x > 0) nb.push_back(i - 1);
        if (x + 1 < w) nb.push_back(i + 1);
        if (y > 0) nb.push_back(i - w);
        if (y + 1 < h) nb.push_back(i + w);
        for (int j : nb)
          if (region[j] < 0 && !cut.count({i, j})) {
            region[j] = nr;
            q.push(j);
          }
      }
      ++nr;
    }
    int ext = -1;
    const int needed = corners.size() == 4 ? 3 : static_cast<int>(corners.size());
    for (int r = 0; r < nr; ++r) {
      int k = 0;
      for (int cn : corners) k += region[cn] == r;
      if (k >= needed) ext = r;
    }
    if (ext < 0) return majority();
    for (int i = 0; i < w * h; ++i)
      if (region[i] != ext) sea[i] = false;
  }
  for (int i = 0; i < w * h; ++i)
    if (sea[i]) return s[i] > 0 ? EnsembleLabel::Plus : EnsembleLabel::Minus;
  return majority();
}

std::vector<int> unpack(std::uint64_t x, int n) {
  std::vector<int> s(n);
  for (int i = 0; i < n; ++i) s[i] = (x >> i) & 1 ? 1 : -1;
  return s;
}

Model random_model(const Volume& v, Rng& rng, Couplings* used = nullptr) {
  Couplings c{-2.0 * uniform01(rng) - 0.2, -2.0 * uniform01(rng) + 0.5};
  if (used) *used = c;
  return make_model(v, c, sample_boundary(v, BoundaryKind::symmetric_iid, rng()));
}

// Brute force over SpinConfig and the reference Hamiltonian. Weights are
// shifted by a fixed energy so they stay finite; results are reported back
// in absolute units.
struct Brute {
  double z = 0, z_pos = 0, z_neg = 0, z_zero = 0, s0 = 0;
};
Brute brute(const Model& m, std::uint32_t site) {
  const std::size_t n = m.volume.num_sites();
  const std::uint64_t count = std::uint64_t{1} << n;
  double e_min = 0;
  for (std::uint64_t x = 0; x < count; ++x) e_min = std::min(e_min, hamiltonian(m, SpinConfig::from_word(x, n)));
  CompensatedSum z, zp, zn, z0, s0;
  for (std::uint64_t x = 0; x < count; ++x) {
    auto s = SpinConfig::from_word(x, n);
    const double w = std::exp(e_min - hamiltonian(m, s));
    z.add(w);
    s0.add(w * s[site]);
    const long mag = s.magnetization();
    (mag > 0 ? zp : mag < 0 ? zn : z0).add(w);
  }
  const double scale = std::exp(-e_min);
  return {z.value() * scale, zp.value() * scale, zn.value() * scale, z0.value() * scale, s0.value() * scale};
}

TEST(Contours, SimpleExamples) {
  auto v = build_volume(2, 4);
  ContourClassifier cl(v);
  EXPECT_EQ(cl.classify(0xffff), EnsembleLabel::Plus);
  EXPECT_EQ(cl.classify(0), EnsembleLabel::Minus);
  EXPECT_EQ(cl.classify(0xffff & ~(1u << 5)), EnsembleLabel::Plus);
  auto a = cl.analyze(0xffff & ~(1u << 5));
  EXPECT_EQ(a.contours, 1);
  EXPECT_EQ(a.max_length, 4);
  // A lone minus corner is interior to its contour.
  EXPECT_EQ(cl.classify(0xffff & ~1u), EnsembleLabel::Plus);
  // Left half minus, right half plus: an interface; the layer ties and the
  // origin (local (2, 2), on the plus side) decides.
  EXPECT_TRUE(cl.analyze(0xcccc).interface);
  EXPECT_EQ(cl.classify(0xcccc), EnsembleLabel::Plus);
  EXPECT_EQ(cl.classify(0x3333), EnsembleLabel::Minus);
  EXPECT_EQ(classify_ensemble(SpinConfig(16, 1), v), EnsembleLabel::Plus);
}

TEST(Contours, ExhaustivePartitionAndFlipAntisymmetry) {
  auto v = build_volume(2, 4);
  ContourClassifier cl(v);
  long checked = 0;
  for (std::uint64_t x = 0; x < (1u << 16); ++x) {
    const auto l = cl.classify(x);
    EXPECT_EQ(cl.classify(~x & 0xffff), opposite(l));
    const int m = 2 * std::popcount(x) - 16;
    if (std::abs(m) >= 8) {
      EXPECT_EQ(l, m > 0 ? EnsembleLabel::Plus : EnsembleLabel::Minus) << x;
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
  for (auto dims : std::vector<std::vector<int>>{{3, 5}, {5, 3}, {1, 6}, {2, 2}, {2, 2, 2}}) {
    auto b = Volume::box(dims);
    ContourClassifier c(b);
    const std::uint64_t all = (std::uint64_t{1} << b.num_sites()) - 1;
    for (std::uint64_t x = 0; x <= all; ++x) ASSERT_EQ(c.classify(~x & all), opposite(c.classify(x)));
  }
}

TEST(Contours, MatchesSlowOracle) {
  for (auto dims : std::vector<std::vector<int>>{{3, 3}, {4, 4}, {3, 5}}) {
    auto b = Volume::box(dims);
    ContourClassifier c(b);
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << b.num_sites()); ++x)
      ASSERT_EQ(c.classify(x), slow_label(unpack(x, b.num_sites()), dims[0], dims[1], b.origin_site())) << x;
  }
  Rng rng(3);
  for (auto dims : std::vector<std::vector<int>>{{6, 6}, {8, 8}, {5, 9}}) {
    auto b = Volume::box(dims);
    ContourClassifier c(b);
    const int n = static_cast<int>(b.num_sites());
    for (int t = 0; t < 3000; ++t) {
      // Low-temperature-like: mostly one sign with a few droplets.
      std::uint64_t x = t % 2 ? ~std::uint64_t{0} : 0;
      const int k = 1 + static_cast<int>(uniform_below(rng, 12));
      for (int f = 0; f < k; ++f) x ^= std::uint64_t{1} << uniform_below(rng, n);
      if (t % 3 == 0) x = rng();
      ASSERT_EQ(c.classify(x), slow_label(unpack(x, n), dims[0], dims[1], b.origin_site())) << t;
    }
  }
}

TEST(Enumerate, SingleSiteExamples) {
  auto v = build_volume(2, 1);
  auto r = enumerate(v, {-1.0, -1.0}, sample_boundary(v, BoundaryKind::all_plus), canonical_window(v));
  EXPECT_NEAR(r.full.log_z, std::log(std::exp(4.0) + std::exp(-4.0)), 1e-14);
  EXPECT_NEAR(r.full.expectations[0], std::tanh(4.0), 1e-15);
  EXPECT_NEAR(r.full.expectations[0], 0.999329, 5e-7);
  EXPECT_EQ(r.full.expectations[1], 1.0);  // unit stand-in for the missing pair
  auto f = free_energy_pair(r);
  EXPECT_NEAR(f.f_plus, 4.0, 1e-14);
  EXPECT_NEAR(f.f_minus, -4.0, 1e-14);
  EXPECT_NEAR(f.delta, 8.0, 1e-14);
  auto balanced = enumerate(v, {-1.0, -1.0}, explicit_boundary(v, {1, -1, 1, -1}), {});
  EXPECT_EQ(free_energy_pair(balanced).delta, 0.0);
}

TEST(Enumerate, PartitionMirrorAndDecomposition) {
  Rng rng(11);
  for (int t = 0; t < 40; ++t) {
    auto v = t % 4 == 3 ? Volume::box({2, 2, 2}) : Volume::box({2 + t % 3, 3});
    Couplings c{-1.5 * uniform01(rng) - 0.3, -1.0};
    auto eta = sample_boundary(v, BoundaryKind::symmetric_iid, rng());
    auto w = canonical_window(v);
    auto r = enumerate(v, c, eta, w);
    auto m = enumerate(v, c, flip(eta), w);
    EXPECT_NEAR(std::exp(r.plus.log_z - r.full.log_z) + std::exp(r.minus.log_z - r.full.log_z), 1.0, 1e-12);
    auto b = brute(make_model(v, c, eta), v.origin_site());
    EXPECT_NEAR(r.full.log_z, std::log(b.z), 1e-12);
    EXPECT_NEAR(r.full.expectations[0], b.s0 / b.z, 1e-12);
    EXPECT_NEAR(r.full.log_z, m.full.log_z, 1e-12);
    EXPECT_NEAR(r.plus.log_z, m.minus.log_z, 1e-12);
    EXPECT_NEAR(free_energy_pair(r).delta, -free_energy_pair(m).delta, 1e-12);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double sign = w[k].odd() ? -1.0 : 1.0;
      EXPECT_NEAR(r.full.expectations[k], sign * m.full.expectations[k], 1e-12);
      EXPECT_NEAR(r.plus.expectations[k], sign * m.minus.expectations[k], 1e-12);
      EXPECT_LE(std::abs(r.plus.expectations[k]), 1.0);
    }
    auto d = decompose(r);
    EXPECT_EQ(d.weights.w_plus + d.weights.w_minus, 1.0);
    EXPECT_LE(d.max_deviation, 1e-12);
  }
  auto v3 = build_volume(2, 3);
  EXPECT_LE(decompose_check(v3, {-1.5, -1.0}, sample_boundary(v3, BoundaryKind::symmetric_iid, 5), canonical_window(v3)),
            1e-12);
  EXPECT_THROW(enumerate(build_volume(2, 6), {}, sample_boundary(build_volume(2, 6), BoundaryKind::all_plus), {}),
               std::invalid_argument);
}

TEST(Enumerate, PlusWeightGrowsWithBoundarySum) {
  // Turn boundary values from minus to plus one at a time.
  auto v = build_volume(2, 3);
  std::vector<std::int8_t> vals(v.boundary_sites().size(), -1);
  double prev = -1.0;
  for (std::size_t k = 0; k <= vals.size(); ++k) {
    if (k) vals[k - 1] = 1;
    auto d = decompose(enumerate(v, {-1.0, -1.0}, explicit_boundary(v, vals), {}));
    EXPECT_GT(d.weights.w_plus, prev);
    prev = d.weights.w_plus;
  }
  EXPECT_GT(prev, 0.999);
}

TEST(EnsembleTable, MatchesDirectEnumeration) {
  Rng rng(21);
  for (auto dims : std::vector<std::vector<int>>{{4, 4}, {3, 5}, {2, 2, 2}, {1, 1}}) {
    auto v = Volume::box(dims);
    EnumerationOptions opt;
    if (v.dim() == 2) opt.long_contour_threshold = 4;
    EnsembleTable table(v, canonical_window(v), opt);
    for (int t = 0; t < 5; ++t) {
      Couplings c{-2.0 * uniform01(rng) - 0.5, -1.0};
      auto eta = sample_boundary(v, BoundaryKind::symmetric_iid, rng());
      auto a = table.evaluate(c, eta);
      auto b = enumerate(v, c, eta, canonical_window(v), opt);
      for (auto [x, y] : {std::pair{&a.full, &b.full}, {&a.plus, &b.plus}, {&a.minus, &b.minus}}) {
        EXPECT_NEAR(x->log_z, y->log_z, 1e-12 * std::max(1.0, std::abs(y->log_z)));
        for (std::size_t k = 0; k < x->expectations.size(); ++k)
          EXPECT_NEAR(x->expectations[k], y->expectations[k], 1e-12);
        EXPECT_NEAR(x->long_contour_probability, y->long_contour_probability, 1e-12);
      }
    }
  }
  auto v = build_volume(2, 3);
  EnsembleTable table(v, origin_window(v));
  std::vector<double> field(9, 0.0);
  field[4] = 1.0;  // centre site is not on the layer
  EXPECT_THROW(table.evaluate(-1.0, field), std::invalid_argument);
}

TEST(EnsembleTable, FieldSignFlipIsOdd) {
  auto v = build_volume(2, 4);
  EnsembleTable table(v, canonical_window(v));
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto eta = sample_boundary(v, BoundaryKind::symmetric_iid, s);
    auto a = table.evaluate({-1.3, -0.9}, eta), b = table.evaluate({-1.3, -0.9}, flip(eta));
    EXPECT_NEAR(free_energy_pair(a).delta, -free_energy_pair(b).delta, 1e-12);
    EXPECT_NEAR(a.plus.expectations[0], -b.minus.expectations[0], 1e-12);
  }
}

TEST(Contours, LongContoursSuppressedAtLowTemperature) {
  // 4x4 at J = -2, J' = -1: weight of configurations with a contour of
  // length >= 2N stays below 1e-3.
  auto v = build_volume(2, 4);
  EnumerationOptions opt;
  opt.long_contour_threshold = 8;
  EnsembleTable table(v, origin_window(v), opt);
  double worst = 0;
  for (std::size_t s = 0; s < 100; ++s)
    worst = std::max(worst, table.evaluate({-2.0, -1.0}, sample_eta(v, 1, "remark-proxy", s)).full.long_contour_probability);
  EXPECT_LE(worst, 1e-3);
  EXPECT_GT(worst, 0.0);
}

TEST(TransferMatrix, AgreesWithEnumerationAndBruteForce) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    auto v = build_volume(2, 3);
    Couplings c;
    auto m = random_model(v, rng, &c);
    auto w = canonical_window(v);
    auto e = enumerate(m, w);
    auto tm = transfer_matrix(m, w, true);
    EXPECT_NEAR(std::exp(tm.log_z - e.full.log_z), 1.0, 1e-12);
    for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(tm.expectations[k], e.full.expectations[k], 1e-12);
    auto b = brute(m, v.origin_site());
    EXPECT_NEAR(std::exp(tm.log_z_pos) / b.z_pos, 1.0, 1e-12);
    EXPECT_NEAR(std::exp(tm.log_z_neg) / b.z_neg, 1.0, 1e-12);
    EXPECT_EQ(tm.log_z_zero, neg_inf);  // odd number of sites
  }
  for (auto dims : std::vector<std::vector<int>>{{4, 4}, {2, 6}, {5, 3}, {1, 7}, {4, 1}, {1, 1}, {6, 4}}) {
    auto v = Volume::box(dims);
    auto m = random_model(v, rng);
    auto w = canonical_window(v);
    auto tm = transfer_matrix(m, w, true);
    auto b = brute(m, v.origin_site());
    EXPECT_NEAR(std::exp(tm.log_z) / b.z, 1.0, 1e-12);
    EXPECT_NEAR(std::exp(tm.log_z_pos) / b.z_pos, 1.0, 1e-12);
    EXPECT_NEAR(std::exp(tm.log_z_neg) / b.z_neg, 1.0, 1e-12);
    if (b.z_zero > 0) EXPECT_NEAR(std::exp(tm.log_z_zero) / b.z_zero, 1.0, 1e-12);
    EXPECT_NEAR(tm.expectations[0], b.s0 / b.z, 1e-12);
    auto e = enumerate(m, w);
    for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(tm.expectations[k], e.full.expectations[k], 1e-12);
    auto plain = transfer_matrix(m, w, false);
    EXPECT_NEAR(plain.log_z, tm.log_z, 1e-12 * std::abs(tm.log_z) + 1e-13);
    EXPECT_NEAR(std::exp(log_add(log_add(tm.log_z_pos, tm.log_z_neg), tm.log_z_zero) - tm.log_z), 1.0, 1e-13);
  }
}

TEST(TransferMatrix, AgreesWithSplitEnumerationBeyondPlainLimit) {
  Rng rng(8);
  for (auto dims : std::vector<std::vector<int>>{{3, 10}, {3, 12}, {4, 7}}) {
    auto v = Volume::box(dims);
    for (int t = 0; t < 3; ++t) {
      auto m = random_model(v, rng);
      const double split = log_partition_function(m);
      const double tm = transfer_matrix(m, {}, false).log_z;
      EXPECT_NEAR(std::exp(tm - split), 1.0, 1e-12);
    }
  }
  auto v = Volume::box({4, 5});
  auto m = random_model(v, rng);
  EXPECT_NEAR(log_partition_function(m), enumerate(m, {}).full.log_z, 1e-12);
}

TEST(TransferMatrix, FreeBoundaryIgnoresEtaAndLimits) {
  auto v = build_volume(2, 6);
  const double a = transfer_matrix(v, {-1.0, 0.0}, sample_boundary(v, BoundaryKind::symmetric_iid, 1), {}, false).log_z;
  const double b = transfer_matrix(v, {-1.0, 0.0}, sample_boundary(v, BoundaryKind::symmetric_iid, 2), {}, false).log_z;
  EXPECT_EQ(a, b);
  auto big = build_volume(2, 13);
  EXPECT_THROW(transfer_matrix(big, {}, sample_boundary(big, BoundaryKind::all_plus), {}, true), std::invalid_argument);
  auto huge = Volume::box({17, 2});
  EXPECT_THROW(transfer_matrix(huge, {}, sample_boundary(huge, BoundaryKind::all_plus), {}, false), std::invalid_argument);
}

TEST(TransferMatrix, ProxyFreeEnergiesAreOdd) {
  auto v = build_volume(2, 8);
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto eta = sample_boundary(v, BoundaryKind::symmetric_iid, s);
    auto a = transfer_matrix(v, {-1.2, -1.0}, eta, origin_window(v), true);
    auto b = transfer_matrix(v, {-1.2, -1.0}, flip(eta), origin_window(v), true);
    EXPECT_NEAR(free_energy_pair(a).delta, -free_energy_pair(b).delta, 1e-10);
    EXPECT_NEAR(restricted_expectations(a, EnsembleLabel::Plus)[0], -restricted_expectations(b, EnsembleLabel::Minus)[0],
                1e-10);
  }
}

TEST(ExactSampler, FrequenciesMatchProbabilities) {
  auto v = build_volume(2, 2);
  auto m = make_model(v, {-0.5, -0.3}, sample_boundary(v, BoundaryKind::symmetric_iid, 4));
  ExactSampler sampler(m);
  Rng rng(1);
  std::vector<int> hist(16, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hist[sampler.sample_word(rng)];
  for (int x = 0; x < 16; ++x) {
    const double p = sampler.probability(x);
    EXPECT_LT(std::abs(hist[x] / double(n) - p), 4 * std::sqrt(p * (1 - p) / n) + 1e-9);
  }
}

TEST(Surveys, FreeBoundaryIsDegenerateAndMeanIsZero) {
  FeSurveyParams p;
  p.widths = {2, 3, 4};
  p.couplings = {-1.2, 0.0};
  p.samples = 1000;
  for (const auto& r : fe_difference_survey(p)) {
    EXPECT_TRUE(r.probability == 0.0 || r.probability == 1.0);
    EXPECT_NEAR(r.mean_delta, 0.0, 1e-12);
  }
  p.couplings = {-1.2, -1.0};
  p.samples = 2000;
  auto rows = fe_difference_survey(p);
  for (const auto& r : rows) {
    EXPECT_LT(std::abs(r.mean_delta), 4 * r.stderr_delta + 1e-12);
    EXPECT_GE(r.ci.high, r.probability);
    EXPECT_LE(r.ci.low, r.probability);
  }
  EXPECT_LE(rows[1].tail_min_abs_delta, rows[2].tail_min_abs_delta);
  p.workers = 3;
  auto again = fe_difference_survey(p);
  for (std::size_t k = 0; k < rows.size(); ++k) EXPECT_EQ(rows[k].mean_delta, again[k].mean_delta);
}

TEST(Surveys, RestrictedProbe) {
  auto v = build_volume(2, 4);
  EnsembleTable table(v, origin_window(v));
  auto plus = table.evaluate({-2.0, -1.0}, sample_boundary(v, BoundaryKind::all_plus));
  EXPECT_LE(std::abs(plus.plus.expectations[0] - plus.full.expectations[0]), 1e-3);

  ProbeParams p;
  p.sizes = {3, 4};
  p.samples = 100;
  auto rows = restricted_convergence_probe(p);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.pure_plus, -r.pure_minus, 1e-12);
    EXPECT_GE(r.worst_plus, r.mean_plus);
    EXPECT_LT(r.worst_plus, 0.1);
  }
  RestrictedSolver solver(4, {-2.0, -1.0});
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto eta = sample_boundary(v, BoundaryKind::symmetric_iid, s);
    auto a = solver.restricted(eta), b = solver.restricted(flip(eta));
    EXPECT_NEAR(a.first, -b.second, 1e-12);
  }
  p.couplings = {-1.0, -1.0};
  EXPECT_THROW(restricted_convergence_probe(p), std::invalid_argument);
}

}  // namespace
}  // namespace rbc

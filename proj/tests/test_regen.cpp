#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "rwre/regen.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

namespace {

EnvDistribution two_atom_wide() {
  LocalEnv a, b;
  a.d = b.d = 2;
  a.kappa = b.kappa = 0.21;
  a.p = {0.29, 0.29, 0.21, 0.21, 0, 0, 0, 0};
  b.p = {0.21, 0.21, 0.29, 0.29, 0, 0, 0, 0};
  return EnvDistribution::proportional({a, b}, {0.5, 0.5}, {1, 0, 0, 0}, 0.21);
}

RegenKnobs quick_knobs() {
  RegenKnobs k;
  k.period = 32;
  k.bottom_gaps = 2;
  k.confirm_levels = 2;
  return k;
}

// ladder trace: h_i = i, gap 2, coins all set to `coin`
LevelTrace ladder_trace(size_t top_height, uint8_t coin) {
  LevelTrace tr;
  tr.gap = 2;
  for (size_t i = 0; i <= top_height; ++i)
    tr.heights.push_back(static_cast<int64_t>(i));
  const size_t levels = top_height / 2;
  for (size_t lv = 0; lv <= levels; ++lv) tr.entry_time.push_back(2 * lv);
  tr.coins.assign(levels, coin);
  return tr;
}

// pooled one-sample chi-square against expected probabilities
double chi2_p(const std::vector<double>& counts, const Eigen::VectorXd& probs) {
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  double chi = 0.0, pooled_o = 0.0, pooled_e = 0.0;
  int dof = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double e = n * probs[i];
    if (e < 5.0) {
      pooled_o += counts[static_cast<size_t>(i)];
      pooled_e += e;
      continue;
    }
    chi += (counts[static_cast<size_t>(i)] - e) * (counts[static_cast<size_t>(i)] - e) / e;
    ++dof;
  }
  if (pooled_e > 0.0) {
    chi += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++dof;
  }
  REQUIRE(dof >= 1);
  return chi2_survival(chi, dof);
}

}  // namespace

TEST_SUITE("regen") {

TEST_CASE("scanner on a monotone ladder confirms every head") {
  LevelTrace tr = ladder_trace(40, 1);
  ScanResult res = scan_regenerations(tr, 2, 0);
  // level n is confirmed once the walk reaches (n+1)*2 + 4 <= 40, so n <= 17
  REQUIRE(res.tau.size() == 18);
  for (size_t n = 0; n < res.tau.size(); ++n) {
    CHECK(res.tau[n] == 2 * (n + 1));
    CHECK(res.tau_tilde[n] == 2 * n);
    CHECK(res.k_counts[n] == 1);
  }
  CHECK(res.censored == 1);  // the level-18 candidate runs off the horizon
}

TEST_CASE("scanner sees no candidates when every coin is tails") {
  LevelTrace tr = ladder_trace(40, 0);
  ScanResult res = scan_regenerations(tr, 2, 0);
  CHECK(res.tau.empty());
  CHECK(res.censored == 1);
}

TEST_CASE("step guard postpones confirmation without moving tau") {
  LevelTrace tr = ladder_trace(40, 1);
  ScanResult res = scan_regenerations(tr, 2, 10);
  // candidate at level n resolves at step 2(n+1) + 10 <= 40, so n <= 14
  REQUIRE(res.tau.size() == 15);
  CHECK(res.tau.front() == 2);
  CHECK(res.tau.back() == 30);
  CHECK(res.censored == 1);
}

TEST_CASE("full-gap backtrack abandons the candidate and re-anchors") {
  LevelTrace tr;
  tr.gap = 2;
  tr.heights = {0, 1, 2, 1, 0, 1, 2, 3, 4, 5, 6, 7, 8};
  tr.entry_time = {0, 2, 8, 10, 12};  // level 2 is re-entered at step 8
  tr.coins = {1, 1, 1, 1};
  ScanResult res = scan_regenerations(tr, 1, 0);
  // level 0 heads is abandoned by the dip to 0; the scan resumes at level 2,
  // whose heads spends k = 2 candidates total; level 3 runs off the horizon
  REQUIRE(res.tau.size() == 1);
  CHECK(res.tau[0] == 10);
  CHECK(res.tau_tilde[0] == 8);
  CHECK(res.k_counts[0] == 2);
  CHECK(res.censored == 1);
}

TEST_CASE("band law pair is a probability pair with unwrap roundtrip") {
  EnvDistribution dist = two_atom_wide();
  EnvironmentField field(dist, derive_key({611u}));
  PerturbedView view(field, 0.1);
  LevelClock clock = LevelClock::from_lambda(0.1);
  Point entry{0, 5, 0, 0};
  GapLaws laws(view, clock, 0, entry, quick_knobs());
  const GapLawPair& pair = laws.at(entry);
  CHECK(pair.top.minCoeff() >= 0.0);
  CHECK(pair.mu1.minCoeff() >= 0.0);
  CHECK(pair.top.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(pair.mu1.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(pair.top_up > 0.0);
  CHECK(pair.top_up <= 1.0);
  CHECK(pair.mu1_up > 0.0);
  CHECK(pair.mu1_up <= 1.0);
  for (int lat = 0; lat < 32; ++lat) {
    Point p = laws.top_rep(lat, entry);
    CHECK(p[0] == clock.gap());
    CHECK(laws.lat_of(p) == lat);
    CHECK(std::llabs(p[1] - entry[1]) <= 16);
  }
}

TEST_CASE("fitted beta sits below every probed minorization ratio") {
  EnvDistribution dist = two_atom_wide();
  EnvironmentField field(dist, derive_key({612u}));
  PerturbedView view(field, 0.1);
  LevelClock clock = LevelClock::from_lambda(0.1);
  std::vector<Point> entries = {Point{0, 0, 0, 0}, Point{0, 3, 0, 0},
                                Point{0, -2, 0, 0}};
  std::vector<double> cands;
  for (double c = 0.5; c > 0.04; c -= 0.05) cands.push_back(c);
  BetaFit fit = fit_beta(view, clock, entries, cands, quick_knobs());
  REQUIRE(fit.ok);
  CHECK(fit.beta > 0.0);
  REQUIRE(fit.site_min_ratio.size() == 3);
  for (double r : fit.site_min_ratio) {
    CHECK(r > 0.0);
    CHECK(fit.beta <= r + 1e-12);
  }
  BetaFit none = fit_beta(view, clock, entries, {}, quick_knobs());
  CHECK(!none.ok);
  CHECK(none.beta == 0.0);
}

TEST_CASE("one-level endpoint draws recover the unconditioned entry law") {
  // with one level the beta-mixture of mu1 and the complement collapses back
  // to the deep-band top law, whatever beta is
  EnvDistribution dist = two_atom_wide();
  EnvironmentField field(dist, derive_key({613u}));
  PerturbedView view(field, 0.1);
  LevelClock clock = LevelClock::from_lambda(0.1);
  RegenKnobs knobs = quick_knobs();
  const double beta = 0.2;
  EndpointChain chain(view, clock, beta, origin(), 1, knobs);
  GapLaws laws(view, clock, 0, origin(), knobs);
  const GapLawPair& pair = laws.at(origin());

  Stream rng({614});
  std::vector<double> counts(32, 0.0);
  size_t clipped = 0;
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    Point p = chain.sample(rng, &clipped);
    REQUIRE(p[0] == clock.gap());
    counts[static_cast<size_t>(laws.lat_of(p))] += 1.0;
  }
  CHECK(clipped == 0);
  CHECK(chi2_p(counts, pair.top) > 0.0027);
}

TEST_CASE("constructed path stitches bridges through its own entry ladder") {
  EnvDistribution dist = two_atom_wide();
  EnvironmentField field(dist, derive_key({615u}));
  PerturbedView view(field, 0.1);
  LevelClock clock = LevelClock::from_lambda(0.1);
  Stream coins({616});
  Stream paths({617});
  ConstructedSegments seg = sample_constructed_path(view, clock, 0.2, origin(),
                                                    2, coins, paths,
                                                    quick_knobs());
  REQUIRE(seg.entries.size() == 3);
  REQUIRE(seg.coins.size() == 2);
  CHECK(seg.entries[0] == origin());
  for (int j = 0; j < 3; ++j) CHECK(seg.entries[static_cast<size_t>(j)][0] == j * clock.gap());
  CHECK(seg.path.start == origin());
  CHECK(seg.path.end() == seg.entries.back());
  // entry points sit on the path at the recorded arrival order
  std::vector<int64_t> track = seg.path.e1_track();
  CHECK(track.front() == 0);
  CHECK(track.back() == 2 * clock.gap());
}

TEST_CASE("posterior replica produces consistent confirmed blocks") {
  EnvDistribution dist = two_atom_wide();
  RegenRunConfig cfg;
  cfg.lambda = 0.1;
  cfg.beta = 0.15;
  cfg.horizon = 20000;
  cfg.fs = {LocalFunction::constant(1.0)};
  cfg.knobs = quick_knobs();
  ReplicaResult res = run_posterior_replica(dist, 618, 0, cfg);
  const int64_t gap = LevelClock::from_lambda(cfg.lambda).gap();
  REQUIRE(res.tau.size() >= 2);
  CHECK(res.invariant_violations == 0);
  CHECK(res.has_first);
  REQUIRE(res.blocks.size() == res.tau.size() - 1);
  for (size_t k = 0; k + 1 < res.tau.size(); ++k) {
    CHECK(res.tau[k + 1] > res.tau[k]);
    CHECK(res.tau_tilde[k] <= res.tau[k]);
    const BlockSample& b = res.blocks[k];
    CHECK(b.dtau == static_cast<double>(res.tau[k + 1] - res.tau[k]));
    CHECK(b.dx1 == static_cast<double>(res.tau_h[k + 1] - res.tau_h[k]));
    CHECK(b.dx1 >= static_cast<double>(gap));
    CHECK(b.fsum[0] == b.dtau);  // unit local function counts the steps
    CHECK(res.k_counts[k] >= 1);
  }
  for (size_t k = 0; k < res.tau.size(); ++k) {
    CHECK(res.tau_h[k] % gap == 0);
    CHECK(res.tau_h[k] >= static_cast<int64_t>(k + 1) * gap);
  }
  // same inputs reproduce the same decomposition
  ReplicaResult res2 = run_posterior_replica(dist, 618, 0, cfg);
  CHECK(res2.tau == res.tau);
  CHECK(res2.blocks.size() == res.blocks.size());
  for (size_t k = 0; k < res.blocks.size(); ++k) {
    CHECK(res2.blocks[k].dtau == res.blocks[k].dtau);
    CHECK(res2.blocks[k].dx1 == res.blocks[k].dx1);
  }
}

TEST_CASE("lag correlation pools within replicas only") {
  std::vector<std::vector<double>> linear(2);
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 20; ++i)
      linear[static_cast<size_t>(r)].push_back(10.0 * r + i);
  LagCorrelation c1 = block_lag_correlation(linear, 1);
  CHECK(c1.pairs == 38);  // 19 per replica, none straddling
  CHECK(c1.corr == doctest::Approx(1.0).epsilon(1e-12));
  LagCorrelation far = block_lag_correlation(linear, 25);
  CHECK(far.pairs == 0);  // no series long enough
  CHECK(far.corr == 0.0);
  std::vector<std::vector<double>> alt(1);
  for (int i = 0; i < 40; ++i) alt[0].push_back(i % 2 ? 0.0 : 2.0);
  LagCorrelation ca = block_lag_correlation(alt, 1);
  CHECK(ca.pairs == 39);
  CHECK(ca.corr == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ca.z < -kSigmas);
}

}  // TEST_SUITE

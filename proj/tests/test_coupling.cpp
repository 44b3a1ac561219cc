#include <doctest.h>

#include <cmath>
#include <vector>

#include "rwre/coupling.hpp"
#include "rwre/linsolve.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

using namespace rwre;

namespace {

// absorbing-chain oracle for P(hit -j before +i) from 0
double ruin_by_solve(double q, int64_t i, int64_t j) {
  const int n = static_cast<int>(i + j - 1);
  const double p = q / (1.0 + q);
  std::vector<Triplet> tr;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    tr.emplace_back(s, s, 1.0);
    if (s + 1 < n) tr.emplace_back(s, s + 1, -p);
    if (s - 1 >= 0) tr.emplace_back(s, s - 1, -(1.0 - p));
    if (s == 0) b[s] = 1.0 - p;
  }
  LinearSolver solver(n, tr, SolveRoute::dense);
  return solver.solve(b)[static_cast<int>(j - 1)];
}

EnvDistribution balanced_wide() {
  LocalEnv a, b;
  a.d = b.d = 2;
  a.kappa = b.kappa = 0.21;
  a.p = {0.29, 0.29, 0.21, 0.21, 0, 0, 0, 0};
  b.p = {0.21, 0.21, 0.29, 0.29, 0, 0, 0, 0};
  return EnvDistribution::proportional({a, b}, {0.5, 0.5}, {1.0, 0.0, 0.0, 0.0},
                                       0.21);
}

}  // namespace

TEST_SUITE("coupling") {

TEST_CASE("ruin closed form against the dense solve on a 20-case grid") {
  const double qs[] = {2.0, 1.5, 1.1, 1.0 + 1e-7, 0.5};
  const int64_t ij[][2] = {{1, 1}, {3, 2}, {5, 5}, {2, 7}};
  for (double q : qs)
    for (auto& c : ij) {
      CHECK(std::abs(gambler_ruin(q, c[0], c[1]) - ruin_by_solve(q, c[0], c[1])) <=
            1e-12);
    }
}

TEST_CASE("ruin formula fixed points") {
  CHECK(gambler_ruin(2.0, 1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(gambler_ruin(2.0, 3, 2) == doctest::Approx(7.0 / 31.0).epsilon(1e-14));
  // q -> 1 limit is i/(i+j), approached continuously
  CHECK(gambler_ruin(1.0, 2, 3) == doctest::Approx(2.0 / 5.0).epsilon(1e-14));
  CHECK(gambler_ruin(1.0 + 1e-13, 2, 3) ==
        doctest::Approx(2.0 / 5.0).epsilon(1e-9));
  CHECK(gambler_ruin(1.0 - 1e-13, 2, 3) ==
        doctest::Approx(2.0 / 5.0).epsilon(1e-9));
}

TEST_CASE("never-visit probability and its domain") {
  CHECK(never_visit_below(2.0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(never_visit_below(2.0, 3) == doctest::Approx(1.0 - 1.0 / 8.0).epsilon(1e-14));
  CHECK_THROWS(never_visit_below(0.5, 1));  // formula needs rightward drift
  CHECK_THROWS(never_visit_below(1.0, 2));
}

TEST_CASE("reflected chain: expected hit time matches simulation") {
  const double lambda = 0.08, kappa = 0.25;
  const int64_t height = 6;
  const double exact = z_expected_hit(lambda, kappa, height);
  Stream rng({771});
  std::vector<double> hits;
  for (int r = 0; r < 4000; ++r)
    hits.push_back(static_cast<double>(
        simulate_z_hit(lambda, kappa, height, rng, 10000000)));
  MeanCI ci = mean_ci(hits);
  CHECK(ci.contains(exact));
}

TEST_CASE("reflected chain: top-before-origin probability from state 1") {
  const double lambda = 0.06, kappa = 0.25;
  const int64_t height = 5;
  const double u = z_up_probability(lambda, kappa);
  CHECK(u == doctest::Approx((1.0 - lambda / kappa) / 2.0).epsilon(1e-14));
  const double exact = z_top_probability(lambda, kappa, height);
  Stream rng({772});
  int top = 0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    int64_t z = 1;
    for (;;) {
      z += rng.next_unit() < u ? 1 : -1;
      if (z == 0 || z == height) break;
    }
    if (z == height) ++top;
  }
  const double phat = static_cast<double>(top) / reps;
  const double se = std::sqrt(exact * (1 - exact) / reps);
  CHECK(std::abs(phat - exact) < kSigmas * se);
}

TEST_CASE("coupled run keeps its invariants and orders the clocks") {
  EnvDistribution dist = balanced_wide();
  for (uint64_t r = 0; r < 12; ++r) {
    EnvironmentField field(dist, derive_key({91u, r}));
    PerturbedView view(field, 0.1);
    LevelClock clock = LevelClock::from_lambda(0.1);
    CouplingConfig cc;
    cc.n_max = 3;
    cc.horizon = 400000;
    Stream rng({92u, r});
    // run_coupling asserts the parity/domination invariant per step
    CouplingRun run = run_coupling(view, clock, origin(), cc, rng);
    CHECK((std::llabs(run.final_h) - run.final_y) % 2 == 0);
    CHECK(std::llabs(run.final_h) >= run.final_y);
    size_t prev_t = 0, prev_s = 0, prev_d = 0;
    for (size_t n = 1; n <= 3; ++n) {
      const size_t t = run.t_tilde[n], s = run.s_tilde[n];
      if (t && s) CHECK(t <= s);  // walk crosses levels no later than Y
      if (t) {
        CHECK(t > prev_t);
        prev_t = t;
      }
      if (s) {
        CHECK(s > prev_s);
        prev_s = s;
      }
      const size_t d = run.s_drift[n];
      if (d) {
        CHECK(d > prev_d);
        CHECK(d <= run.e1_moves);
        prev_d = d;
      }
      // two-sided clock is the earlier signed crossing
      const size_t tp = run.t_plus[n], tm = run.t_minus[n];
      if (tp && tm)
        CHECK(t == std::min(tp, tm));
      else if (tp || tm)
        CHECK(t == std::max(tp, tm));
    }
    CHECK(run.steps <= cc.horizon);
    CHECK(run.e1_moves <= run.steps);
    CHECK(run.clamped == 0);  // balanced marginal keeps the B-coin in range
  }
}

TEST_CASE("drift-chain level clock matches the exact hit-time solve") {
  EnvDistribution dist = balanced_wide();
  const double lambda = 0.1;
  LevelClock clock = LevelClock::from_lambda(lambda);
  std::vector<double> hits1, hits3;
  for (uint64_t r = 0; r < 32; ++r) {
    EnvironmentField field(dist, derive_key({95u, r}));
    PerturbedView view(field, lambda);
    CouplingConfig cc;
    cc.n_max = 3;
    cc.horizon = 40000;
    Stream rng({96u, r});
    CouplingRun run = run_coupling(view, clock, origin(), cc, rng);
    REQUIRE(run.s_drift[1] > 0);
    REQUIRE(run.s_drift[3] > 0);
    hits1.push_back(static_cast<double>(run.s_drift[1]));
    hits3.push_back(static_cast<double>(run.s_drift[3]));
  }
  MeanCI c1 = mean_ci(hits1), c3 = mean_ci(hits3);
  CHECK(c1.contains(z_drift_expected_hit(lambda, dist.kappa, clock.gap())));
  CHECK(c3.contains(z_drift_expected_hit(lambda, dist.kappa, 3 * clock.gap())));
}

TEST_CASE("drift-chain top probability is level-stable and lambda-linear") {
  const double kappa = 0.21;
  // deep targets: probability settles at 2a/(1+a) with a = lambda/kappa
  for (double lambda : {0.1, 0.05}) {
    const double a = lambda / kappa;
    const double limit = 2.0 * a / (1.0 + a);
    CHECK(z_drift_top_probability(lambda, kappa, 40) ==
          doctest::Approx(limit).epsilon(1e-6));
    CHECK(z_drift_top_probability(lambda, kappa, 80) ==
          doctest::Approx(limit).epsilon(1e-9));
  }
  // the thinned chain's top probability decays with the target instead
  CHECK(z_top_probability(0.1, kappa, 40) <
        0.01 * z_top_probability(0.1, kappa, 20));
}

TEST_CASE("slow-chain up-fraction off the origin matches the reflected law") {
  EnvDistribution dist = balanced_wide();
  const double lambda = 0.09;
  const double u = z_up_probability(lambda, dist.kappa);
  double up = 0, down = 0;
  for (uint64_t r = 0; r < 16; ++r) {
    EnvironmentField field(dist, derive_key({93u, r}));
    PerturbedView view(field, lambda);
    LevelClock clock = LevelClock::from_lambda(lambda);
    CouplingConfig cc;
    cc.n_max = 2;
    cc.horizon = 60000;
    Stream rng({94u, r});
    CouplingRun run = run_coupling(view, clock, origin(), cc, rng);
    up += static_cast<double>(run.y_up);
    down += static_cast<double>(run.y_down);
  }
  const double n = up + down;
  REQUIRE(n > 1000);
  const double se = std::sqrt(u * (1 - u) / n);
  CHECK(std::abs(up / n - u) < kSigmas * se);
}

}  // TEST_SUITE

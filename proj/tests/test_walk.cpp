#include <doctest.h>

#include <cmath>

#include "rwre/lattice.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

using namespace rwre;

namespace {

EnvDistribution srw_proportional() {
  LocalEnv w = simple_walk_cell(2);
  return EnvDistribution::proportional({w}, {1.0}, {1.0, 0.0, 0.0, 0.0}, w.kappa);
}

}  // namespace

TEST_SUITE("walk") {

TEST_CASE("level clock arithmetic") {
  LevelClock c = LevelClock::from_lambda(0.1);
  CHECK(c.half_gap == 5);
  CHECK(c.lambda1() == doctest::Approx(0.1));
  CHECK(c.gap() == 10);

  // lambda1 <= lambda and 0.5/lambda1 is an integer for awkward lambdas too.
  for (double lambda : {0.25, 0.12, 0.1, 0.07, 0.05, 0.033, 0.025, 0.01}) {
    LevelClock k = LevelClock::from_lambda(lambda);
    CHECK(k.lambda1() <= lambda + 1e-15);
    CHECK(k.half_gap == static_cast<int64_t>(std::ceil(1.0 / (2.0 * lambda))));
    CHECK(0.5 / k.lambda1() == doctest::Approx(static_cast<double>(k.half_gap)));
  }
}

TEST_CASE("hitting times of an all-up path") {
  // lambda = 0.25 gives level spacing 4; moving +e1 forever hits level n at
  // step 4n.
  LevelClock c = LevelClock::from_lambda(0.25);
  CHECK(c.gap() == 4);
  WalkPath path;
  path.d = 2;
  path.steps.assign(20, 0);  // all +e1
  HittingReport rep = hitting_times(path, c, 4, 2);
  REQUIRE(rep.up(1).has_value());
  CHECK(*rep.up(1) == 4);
  CHECK(*rep.up(2) == 8);
  CHECK(*rep.up(4) == 16);
  CHECK_FALSE(rep.down(1).has_value());
  CHECK(rep.censored_down);
  CHECK_FALSE(rep.censored_up);
  CHECK(*rep.two_sided(2) == 8);
}

TEST_CASE("hitting censoring on a short path") {
  LevelClock c = LevelClock::from_lambda(0.25);
  WalkPath path;
  path.d = 2;
  path.steps.assign(3, 0);
  HittingReport rep = hitting_times(path, c, 1, 1);
  CHECK(rep.censored_up);
  CHECK(rep.censored_down);
  CHECK_FALSE(rep.two_sided(1).has_value());
}

TEST_CASE("e1 track bookkeeping") {
  WalkPath path;
  path.d = 2;
  path.steps = {0, 2, 1, 1, 3};
  auto track = path.e1_track();
  REQUIRE(track.size() == 6);
  CHECK(track[0] == 0);
  CHECK(track[1] == 1);
  CHECK(track[2] == 1);
  CHECK(track[3] == 0);
  CHECK(track[4] == -1);
  CHECK(track[5] == -1);
  CHECK(path.end()[0] == -1);
  CHECK(path.end()[1] == 0);
}

TEST_CASE("observables of the proportional simple-walk cell") {
  LocalEnv w = simple_walk_cell(2);
  PerturbCell xi = proportional_cell(w, {1.0, 0.0, 0.0, 0.0});
  SitePair zeta{w, xi};
  CHECK(step_ratio(zeta, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(step_ratio(zeta, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(step_ratio(zeta, 2) == doctest::Approx(0.0).epsilon(1e-12));
  // h = sum xi^2/omega = 2 * (1/16)/(1/4) = 1/2.
  CHECK(cell_h(zeta) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empirical speed of the perturbed homogeneous walk") {
  EnvironmentField field(srw_proportional(), 11);
  double lambda = 0.1;
  PerturbedView view(field, lambda);
  // Perturbed drift is lambda * d(xi) = (lambda/2) e1.
  std::vector<double> speeds;
  for (uint64_t r = 0; r < 64; ++r) {
    Stream rng({771, r});
    WalkPath path = simulate(view, origin(), 20000, rng);
    speeds.push_back(empirical_speed(path)[0]);
  }
  MeanCI ci = mean_ci(speeds);
  CHECK(ci.contains(lambda / 2.0));
}

TEST_CASE("centered walk is a martingale under the quenched law") {
  // X_n . e1 - sum of local drifts has mean zero.
  EnvironmentField field(srw_proportional(), 1234);
  double lambda = 0.08;
  PerturbedView view(field, lambda);
  std::vector<double> centered;
  for (uint64_t r = 0; r < 200; ++r) {
    Stream rng({888, r});
    Point x = origin();
    double drift_sum = 0.0;
    for (int i = 0; i < 2000; ++i) {
      LocalEnv row = view.row(x);
      drift_sum += row.drift()[0];
      int dir = rng.categorical(row.p.data(), 4);
      step_inplace(x, dir);
    }
    centered.push_back(static_cast<double>(x[0]) - drift_sum);
  }
  MeanCI ci = mean_ci(centered);
  CHECK(ci.contains(0.0));
}

TEST_CASE("lateral spread stays within range C/lambda") {
  EnvironmentField field(srw_proportional(), 5);
  for (double lambda : {0.1, 0.05}) {
    PerturbedView view(field, lambda);
    LevelClock clock = LevelClock::from_lambda(lambda);
    auto rep = lateral_spread_check(view, clock, 20.0, 400, 2000000, 4242);
    CHECK(rep.censored == 0);
    CHECK(rep.fraction_within > 0.95);
  }
}

}  // TEST_SUITE

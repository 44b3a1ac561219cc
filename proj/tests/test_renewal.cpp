#include <doctest.h>

#include <cmath>

#include "rwre/renewal.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

namespace {

EnvDistribution homogeneous_drifted() {
  LocalEnv w;
  w.d = 2;
  w.kappa = 0.2;
  w.p = {0.4, 0.2, 0.2, 0.2, 0, 0, 0, 0};
  PerturbCell x;
  x.d = 2;
  x.xi = {0.3, -0.3, 0, 0, 0, 0, 0, 0};
  return EnvDistribution::homogeneous_cell(w, x);
}

EnvDistribution two_atom_drifted() {
  LocalEnv a, b;
  a.d = b.d = 2;
  a.kappa = b.kappa = 0.18;
  a.p = {0.40, 0.20, 0.20, 0.20, 0, 0, 0, 0};
  b.p = {0.30, 0.22, 0.30, 0.18, 0, 0, 0, 0};
  PerturbCell xa, xb;
  xa.d = xb.d = 2;
  xa.xi = {0.2, -0.2, 0, 0, 0, 0, 0, 0};
  xb.xi = {0.1, -0.1, 0, 0, 0, 0, 0, 0};
  EnvDistribution dist;
  dist.kind = DistKind::finite_support;
  dist.d = 2;
  dist.kappa = 0.18;
  dist.atoms = {SitePair{a, xa}, SitePair{b, xb}};
  dist.weights = {0.5, 0.5};
  dist.validate();
  return dist;
}

}  // namespace

TEST_SUITE("renewal") {

TEST_CASE("strictly monotone projection renews at every step") {
  std::vector<double> proj;
  for (int i = 0; i <= 20; ++i) proj.push_back(static_cast<double>(i));
  RenewalScan scan = detect_renewals(proj, 4);
  // every t qualifies; t > 16 sits inside the confirmation window
  REQUIRE(scan.times.size() == 17);
  for (size_t k = 0; k < scan.times.size(); ++k) CHECK(scan.times[k] == k);
  CHECK(scan.censored == 4);
}

TEST_CASE("renewals separate strict past maxima from strict future minima") {
  //                       0  1  2  3  4  5  6  7
  std::vector<double> proj{0, 1, 2, 1, 2, 3, 4, 5};
  RenewalScan scan = detect_renewals(proj, 2);
  // t=1,2: the future dips back to 1. t=3: the past already hit 2.
  // t=4: past max 2 is not strict. t=0 and t=5 renew; t=6,7 are unconfirmable.
  REQUIRE(scan.times.size() == 2);
  CHECK(scan.times[0] == 0);
  CHECK(scan.times[1] == 5);
  CHECK(scan.censored == 2);
}

TEST_CASE("flat stretches never renew") {
  //                       0  1  2  3  4  5  6  7  8  9 10
  std::vector<double> proj{0, 1, 1, 1, 2, 3, 3, 4, 5, 6, 7};
  RenewalScan scan = detect_renewals(proj, 1);
  CHECK(scan.times == std::vector<size_t>{0, 4, 7, 8, 9});
  CHECK(scan.censored == 1);
}

TEST_CASE("homogeneous renewal density matches the squared drift gap") {
  // for an iid e1-increment chain with P(+1) = pr, P(-1) = pl the chance
  // that a step is a two-sided strict record is (pr - pl)^2
  EnvDistribution dist = homogeneous_drifted();
  LambdaParams prm;
  prm.replicas = 16;
  prm.horizon = 40000;
  prm.confirm_window = 1500;
  prm.lambda = 0.0;
  LambdaSuite suite = lambda_operator_suite(
      dist, {LocalFunction::constant(1.0)}, 711, prm);
  REQUIRE(suite.ballistic);
  const double exact = 0.04;  // (0.4 - 0.2)^2
  const double n = static_cast<double>(prm.replicas) *
                   static_cast<double>(prm.horizon);
  const double se = std::sqrt(exact / n);  // binomial-scale error bar
  CHECK(std::abs(suite.renewal_density - exact) < 2.0 * kSigmas * se);
  CHECK(suite.mean_block_steps > 1.0 / exact * 0.5);
  CHECK(suite.mean_block_steps < 1.0 / exact * 2.0);
}

TEST_CASE("constant functional carries zero correlation exactly") {
  EnvDistribution dist = two_atom_drifted();
  LambdaParams prm;
  prm.replicas = 8;
  prm.horizon = 20000;
  prm.confirm_window = 1000;
  prm.lambda = 0.0;
  LambdaSuite suite = lambda_operator_suite(
      dist, {LocalFunction::constant(1.0)}, 712, prm);
  REQUIRE(suite.ballistic);
  REQUIRE(suite.per_f.size() == 1);
  // centered reads of a constant vanish termwise
  CHECK(std::abs(suite.per_f[0].value) <= 1e-14);
  CHECK(suite.per_f[0].ci_low <= 0.0);
  CHECK(suite.per_f[0].ci_high >= 0.0);
  CHECK(suite.per_f[0].q_hat == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the functional is linear over shared paths") {
  EnvDistribution dist = two_atom_drifted();
  LambdaParams prm;
  prm.replicas = 8;
  prm.horizon = 20000;
  prm.confirm_window = 1000;
  prm.lambda = 0.0;
  LocalFunction f1 = LocalFunction::omega_drift_e1();
  LocalFunction f2 = LocalFunction::xi_drift_e1();
  LambdaSuite suite = lambda_operator_suite(dist, {f1, f2}, 713, prm);
  REQUIRE(suite.ballistic);
  REQUIRE(suite.per_f.size() == 2);
  // combination evaluated over the same paths: estimates combine exactly
  LocalFunction combo;
  combo.name = "combo";
  combo.eval = [f1, f2](const SitePair& z) {
    return 2.0 * f1.eval(z) - 0.5 * f2.eval(z);
  };
  LambdaSuite suite2 = lambda_operator_suite(dist, {combo}, 713, prm);
  REQUIRE(suite2.ballistic);
  CHECK(suite2.per_f[0].value ==
        doctest::Approx(2.0 * suite.per_f[0].value - 0.5 * suite.per_f[1].value)
            .epsilon(1e-10));
  CHECK(suite2.per_f[0].q_hat ==
        doctest::Approx(2.0 * suite.per_f[0].q_hat - 0.5 * suite.per_f[1].q_hat)
            .epsilon(1e-10));
}

TEST_CASE("speed derivative on the tilted simple walk") {
  // a single deterministic cell: lambda 0 needs no sampling and the speed is
  // exactly lambda/2 along e1
  LocalEnv w = simple_walk_cell(2);
  EnvDistribution dist =
      EnvDistribution::homogeneous_cell(w, proportional_cell(w, {1, 0, 0, 0}));
  SpeedDerivativeReport rep =
      speed_derivative(dist, {0.02, 0.04, 0.06, 0.08}, 12, 30000, 714);
  CHECK(rep.v0_exact);
  CHECK(rep.v0 == doctest::Approx(0.0).epsilon(1e-14));
  REQUIRE(rep.points.size() == 4);
  for (const auto& p : rep.points) {
    // exact speed is lambda/2: each point within its own error bar
    CHECK(std::abs(p.v1 - p.lambda / 2.0) < kSigmas * p.se);
  }
  CHECK(std::abs(rep.slope - 0.5) < kSigmas * rep.slope_se);
}

TEST_CASE("variance of centered partial sums grows linearly") {
  EnvDistribution dist = two_atom_drifted();
  VarianceFlatness flat = second_moment_probe(
      dist, LocalFunction::omega_drift_e1(), 0.0, 64, 715,
      {200, 400, 800, 1600});
  REQUIRE(flat.var_over_n.size() == 4);
  for (double v : flat.var_over_n) CHECK(v > 0.0);
  CHECK(flat.ratio_max_min >= 1.0);
  CHECK(flat.ratio_max_min < 5.0);
}

}  // TEST_SUITE

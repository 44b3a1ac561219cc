#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "rwre/lattice.hpp"

using namespace rwre;

namespace {

EnvDistribution two_atom_balanced(double kappa = 0.15) {
  LocalEnv a;
  a.d = 2;
  a.kappa = kappa;
  a.p = {0.35, 0.35, 0.15, 0.15, 0, 0, 0, 0};
  LocalEnv b;
  b.d = 2;
  b.kappa = kappa;
  b.p = {0.15, 0.15, 0.35, 0.35, 0, 0, 0, 0};
  return EnvDistribution::proportional({a, b}, {0.5, 0.5}, {1.0, 0.0, 0.0, 0.0}, kappa);
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("directions and steps") {
  CHECK(dir_axis(0) == 0);
  CHECK(dir_sign(0) == 1);
  CHECK(dir_axis(1) == 0);
  CHECK(dir_sign(1) == -1);
  CHECK(dir_axis(2) == 1);
  CHECK(dir_opposite(4) == 5);
  Point x = origin();
  step_inplace(x, 0);
  step_inplace(x, 3);
  CHECK(x[0] == 1);
  CHECK(x[1] == -1);
}

TEST_CASE("perturbed row of the proportional cell") {
  // Simple walk in d=2, xi(e) = omega(e) e.e1, lambda = 0.1.
  LocalEnv w = simple_walk_cell(2);
  PerturbCell xi = proportional_cell(w, {1.0, 0.0, 0.0, 0.0});
  LocalEnv out = perturb(SitePair{w, xi}, 0.1);
  CHECK(out.p[0] == doctest::Approx(0.275).epsilon(1e-12));
  CHECK(out.p[1] == doctest::Approx(0.225).epsilon(1e-12));
  CHECK(out.p[2] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out.p[3] == doctest::Approx(0.25).epsilon(1e-12));
  double sum = out.p[0] + out.p[1] + out.p[2] + out.p[3];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("perturb rejects lambda outside [0, kappa/2)") {
  LocalEnv w = simple_walk_cell(2);  // kappa = 0.25
  PerturbCell xi = proportional_cell(w, {1.0, 0.0, 0.0, 0.0});
  SitePair zeta{w, xi};
  CHECK_THROWS_AS(perturb(zeta, 0.125), std::invalid_argument);
  CHECK_THROWS_AS(perturb(zeta, -0.01), std::invalid_argument);
  CHECK_NOTHROW(perturb(zeta, 0.1249));
  CHECK_NOTHROW(perturb(zeta, 0.0));
}

TEST_CASE("local_drift") {
  // f(e1) = 1/4, f(-e1) = -1/4, lateral zero -> drift (1/2, 0).
  double f[4] = {0.25, -0.25, 0.0, 0.0};
  auto b = local_drift(f, 2);
  CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("row constraints are validated") {
  LocalEnv bad = simple_walk_cell(2);
  bad.p[0] = 0.5;  // row no longer sums to 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  PerturbCell xi;
  xi.d = 2;
  xi.xi = {0.5, -0.2, 0, 0, 0, 0, 0, 0};  // does not sum to zero
  CHECK_THROWS_AS(xi.validate(), std::invalid_argument);

  PerturbCell big;
  big.d = 2;
  big.xi = {1.5, -1.5, 0, 0, 0, 0, 0, 0};  // entry outside [-1,1]
  CHECK_THROWS_AS(big.validate(), std::invalid_argument);
}

TEST_CASE("site draws are deterministic and consistent on revisit") {
  EnvDistribution dist = two_atom_balanced();
  EnvironmentField field(dist, 2024);
  Point x{3, -5, 0, 0};
  SitePair first = field.site(x);
  for (int rep = 0; rep < 5; ++rep) {
    SitePair again = field.site(x);
    for (int e = 0; e < 4; ++e) {
      CHECK(again.omega.p[e] == first.omega.p[e]);
      CHECK(again.xi.xi[e] == first.xi.xi[e]);
    }
  }
  // Different master seeds decorrelate the field.
  EnvironmentField other(dist, 2025);
  int diff = 0;
  for (int i = 0; i < 200; ++i) {
    Point y{i, 2 * i + 1, 0, 0};
    if (field.site(y).omega.p[0] != other.site(y).omega.p[0]) ++diff;
  }
  CHECK(diff > 50);
}

TEST_CASE("atom frequencies match weights across sites") {
  LocalEnv a = simple_walk_cell(2);
  LocalEnv b = simple_walk_cell(2);
  b.p = {0.3, 0.3, 0.2, 0.2, 0, 0, 0, 0};
  a.kappa = b.kappa = 0.2;  // floor of both rows
  EnvDistribution dist =
      EnvDistribution::proportional({a, b}, {0.7, 0.3}, {1.0, 0.0, 0.0, 0.0}, 0.2);
  // kappa must floor both rows
  EnvironmentField field(dist, 99);
  int na = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    Point x{i % 200, i / 200, 0, 0};
    SitePair z = field.site(x);
    if (z.omega.p[0] == doctest::Approx(0.25)) ++na;
  }
  double se = std::sqrt(0.7 * 0.3 * n);
  CHECK(std::abs(na - 0.7 * n) < 4.0 * se);
}

TEST_CASE("proportional cells sum to zero and respect the modulus cap") {
  EnvDistribution dist = two_atom_balanced();
  EnvironmentField field(dist, 7);
  for (int i = 0; i < 100; ++i) {
    Point x{i, -i, 0, 0};
    SitePair z = field.site(x);
    double sum = 0.0;
    for (int e = 0; e < 4; ++e) {
      sum += z.xi.xi[e];
      CHECK(std::abs(z.xi.xi[e]) <= 1.0);
    }
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("independent product field draws omega and xi separately") {
  LocalEnv w1 = simple_walk_cell(2);
  PerturbCell xp;
  xp.d = 2;
  xp.xi = {0.5, -0.5, 0, 0, 0, 0, 0, 0};
  PerturbCell xm;
  xm.d = 2;
  xm.xi = {-0.5, 0.5, 0, 0, 0, 0, 0, 0};
  EnvDistribution dist;
  dist.kind = DistKind::independent_product;
  dist.d = 2;
  dist.kappa = 0.25;
  dist.omega_atoms = {w1};
  dist.omega_weights = {1.0};
  dist.xi_atoms = {xp, xm};
  dist.xi_weights = {0.75, 0.25};
  dist.validate();

  auto mean = dist.mean_xi_drift();
  CHECK(mean[0] == doctest::Approx(0.75 * 1.0 + 0.25 * (-1.0)).epsilon(1e-12));

  EnvironmentField field(dist, 5150);
  int plus = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    Point x{i % 100, i / 100, 0, 0};
    if (field.site(x).xi.xi[0] > 0) ++plus;
  }
  double se = std::sqrt(0.75 * 0.25 * n);
  CHECK(std::abs(plus - 0.75 * n) < 4.0 * se);
}

TEST_CASE("balanced flag") {
  CHECK(two_atom_balanced().balanced());
  LocalEnv drifted = simple_walk_cell(2);
  drifted.p = {0.3, 0.2, 0.25, 0.25, 0, 0, 0, 0};
  drifted.kappa = 0.2;
  EnvDistribution dist = EnvDistribution::homogeneous_cell(
      drifted, proportional_cell(drifted, {0.0, 1.0, 0.0, 0.0}));
  CHECK_FALSE(dist.balanced());
}

TEST_CASE("particle view shifts the field") {
  EnvDistribution dist = two_atom_balanced();
  EnvironmentField field(dist, 31);
  Point x{4, 9, 0, 0};
  ParticleView view(field, x);
  SitePair direct = field.site(x);
  SitePair via = view.at_origin();
  CHECK(direct.omega.p[0] == via.omega.p[0]);
  Point rel{1, 0, 0, 0};
  Point shifted{5, 9, 0, 0};
  CHECK(view.at(rel).omega.p[0] == field.site(shifted).omega.p[0]);
}

}  // TEST_SUITE

#pragma once

#include <cstdint>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/walk.hpp"

namespace rwre {

// Log Radon-Nikodym weight of the perturbed path law against the base law:
// sum over steps of log(1 + lambda * a(zeta_j, dX_j)) with a = xi/omega read
// at the walker.  Each factor is >= 1 - lambda/kappa > 1/2, so the log is
// always finite.
struct GirsanovWeight {
  double log_weight = 0.0;
  size_t steps = 0;
  double min_factor = 1.0;  // smallest 1 + lambda*a encountered
};

GirsanovWeight log_weight(const EnvironmentField& field, const WalkPath& path,
                          double lambda);

// Third-order expansion of the log weight:
//   log_weight = linear + quadratic + remainder,
//   linear    = lambda * sum a_j,
//   quadratic = -lambda^2/2 * sum a_j^2,
//   remainder = lambda^3 * steps * h_term.
struct TaylorSplit {
  double linear = 0.0;
  double quadratic = 0.0;
  double remainder = 0.0;
  double h_term = 0.0;
  size_t steps = 0;
  // |h_term| stays within (1+1/kappa)/3 whenever |a| <= 1 along the path
  // (true for proportional perturbations); reconstruction always holds.
  double h_bound = 0.0;
};

TaylorSplit taylor_split(const EnvironmentField& field, const WalkPath& path,
                         double lambda);

// Exact enumeration of E_omega[e^G] over all (2d)^n paths from `start`;
// the weighted sum telescopes to 1 for any environment and admissible lambda.
struct UnitMeanReport {
  double value = 0.0;
  size_t paths = 0;
};

UnitMeanReport unit_mean_oracle(const EnvironmentField& field, const Point& start,
                                double lambda, int n_steps);

// Time average of f at the walker over m = ceil(t/lambda^2) steps, scaled by
// lambda^2/t, estimated two ways:
//  - direct:     simulate under omega + lambda*xi;
//  - reweighted: simulate under omega and weight by e^G (mean-one weights).
// ESS is (sum w)^2 / sum w^2; estimates with ESS < min_ess are refused.
struct ReweightedEstimate {
  double direct_mean = 0.0;
  double direct_stderr = 0.0;
  double reweighted_mean = 0.0;
  double reweighted_stderr = 0.0;
  double ess = 0.0;
  size_t replicas = 0;
  size_t block_steps = 0;
  bool refused = false;  // ESS below the floor; reweighted numbers unusable
};

ReweightedEstimate reweighted_block_estimator(const EnvironmentField& field,
                                              const LocalFunction& f, double lambda,
                                              double t, size_t replicas,
                                              uint64_t stream_key,
                                              double min_ess = 30.0);

}  // namespace rwre

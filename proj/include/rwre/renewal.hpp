#pragma once

// Censored renewal detection for directionally transient walks and the
// block-correlation functional built on renewal windows: covariance of
// centered environment reads with the likelihood-direction weights
// a = xi/omega, summed over lagged renewal blocks and normalized by mean
// block length.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/walk.hpp"

namespace rwre {

struct RenewalScan {
  std::vector<size_t> times;  // confirmed renewal times, ascending
  size_t censored = 0;        // candidates too close to the horizon to confirm
};

// t is a renewal when proj_m < proj_t < proj_n for all m < t < n. The right
// condition is checked on the observed path only; candidates within
// confirm_window of the end are dropped as censored.
RenewalScan detect_renewals(const std::vector<double>& proj,
                            size_t confirm_window);

struct LambdaParams {
  size_t replicas = 16;
  size_t horizon = 100000;
  size_t confirm_window = 2000;
  int n_f = 1;            // lag span of the window functional
  size_t bootstrap = 400;
  std::array<double, kMaxDim> ell{1.0, 0.0, 0.0, 0.0};
  double lambda = 0.0;    // measure the blocks under this perturbation
  size_t min_blocks = 30; // below this the estimator refuses (not ballistic)
};

struct LambdaEstimate {
  std::string name;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;  // 3 sigma, bootstrap over replicas
  double q_hat = 0.0;    // post-first-renewal average of f, pooled
};

struct LambdaSuite {
  std::vector<LambdaEstimate> per_f;
  double mean_block_steps = 0.0;
  double renewal_density = 0.0;  // confirmed renewals per step, pooled
  size_t blocks_total = 0;
  bool ballistic = true;  // false: too few blocks, estimates not populated
};

// Shared paths across all functionals, so linear combinations of f give
// exactly linear combinations of estimates.
LambdaSuite lambda_operator_suite(const EnvDistribution& dist,
                                  const std::vector<LocalFunction>& fs,
                                  uint64_t seed, const LambdaParams& prm);

struct SpeedPoint {
  double lambda = 0.0;
  double v1 = 0.0;  // mean e1-speed
  double se = 0.0;
};

struct SpeedDerivativeReport {
  std::vector<SpeedPoint> points;
  double v0 = 0.0;
  double v0_se = 0.0;
  bool v0_exact = false;  // deterministic environment: no sampling at 0
  double slope = 0.0;     // d v1 / d lambda at 0, curvature-corrected fit
  double slope_se = 0.0;
  size_t replicas = 0;
};

// Common random numbers across the lambda grid: replica r uses one
// environment seed and one walk stream for every lambda, so the slope is a
// paired estimate.
SpeedDerivativeReport speed_derivative(const EnvDistribution& dist,
                                       const std::vector<double>& lambdas,
                                       size_t replicas, size_t horizon,
                                       uint64_t seed);

struct VarianceFlatness {
  std::vector<size_t> n_grid;
  std::vector<double> var_over_n;  // Var(centered partial sum at n) / n
  double ratio_max_min = 0.0;
};

// Centered partial sums of f along the walk: the variance should grow
// linearly for summable correlations, so var/n stays within a band.
VarianceFlatness second_moment_probe(const EnvDistribution& dist,
                                     const LocalFunction& f, double lambda,
                                     size_t replicas, uint64_t seed,
                                     const std::vector<size_t>& n_grid);

}  // namespace rwre

#pragma once

// Auxiliary occupation-weighted chain on a finite set U: transition rows are
// annealed averages of omega weighted by the quenched green function of the
// killed walk, so the chain's exit law from U reproduces the annealed exit
// law. Exact mode enumerates every atom assignment on U; monte_carlo samples
// them.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/linsolve.hpp"

namespace rwre {

// inclusive box [lo, hi] on the first d axes, deterministic order
std::vector<Point> box_sites(int d, const Point& lo, const Point& hi);

enum class ChainMode { exact, monte_carlo };

struct KalikowChain {
  int d = 2;
  Point start{};
  std::vector<Point> sites;      // interior of U, fixed order
  std::vector<Point> boundary;   // absorbing states, discovery order
  std::vector<std::array<double, kMaxDirs>> rows;  // auxiliary chain rows
  std::vector<double> occupation;  // annealed expected visits from start
  Eigen::VectorXd annealed_exit;   // annealed exit law over boundary
  Eigen::VectorXd chain_exit;      // exit law of the auxiliary chain itself
  size_t n_assignments = 0;
  ChainMode mode = ChainMode::exact;

  std::array<double, kMaxDim> drift_at(int s) const;
};

// Environment atoms are assigned independently across the sites of U; lambda
// perturbs each assigned cell. mc_samples is ignored in exact mode. Exact
// mode refuses more than ~2e5 assignments.
KalikowChain build_chain(const EnvDistribution& dist, double lambda,
                         const std::vector<Point>& sites, const Point& start,
                         ChainMode mode = ChainMode::exact,
                         size_t mc_samples = 0, uint64_t seed = 0,
                         SolveRoute route = SolveRoute::automatic);

struct ExitIdentityReport {
  double tv = 0.0;  // total variation between chain exit and annealed exit
  double chain_mass = 0.0;
  double annealed_mass = 0.0;
};
ExitIdentityReport exit_identity_check(const KalikowChain& chain);

// Sign certificate for the drift functional
//   A(f) = E[ d(xi).ell / sum_e omega(o,e) f(e) ],  f in [0,1]^{2d} \ {0}.
// A(cf) = A(f)/c, so only the sign matters; probes run on max_e f(e) = 1.
struct ConditionKReport {
  enum class Verdict { certified, refuted, inconclusive };
  Verdict verdict = Verdict::inconclusive;
  double min_value = 0.0;                // minimum of A over probed directions
  double max_abs = 0.0;                  // largest |A| seen (detects A == 0)
  std::array<double, kMaxDirs> witness{};  // minimizing direction
  size_t evaluations = 0;
};

ConditionKReport certify_condition_K(const EnvDistribution& dist,
                                     const std::array<double, kMaxDim>& ell,
                                     uint64_t seed, int grid = 5,
                                     int starts = 24, int iters = 160);

double condition_K_value(const EnvDistribution& dist,
                         const std::array<double, kMaxDim>& ell,
                         const std::array<double, kMaxDirs>& f);

// Smallest normalized auxiliary-chain drift along e1 over a family of sets.
struct RhoEstimate {
  double rho_hat = 0.0;
  std::vector<double> per_set_min;
};
RhoEstimate estimate_rho(const EnvDistribution& dist, double lambda,
                         const std::vector<std::vector<Point>>& sets,
                         const Point& start,
                         ChainMode mode = ChainMode::exact,
                         size_t mc_samples = 0, uint64_t seed = 0);

}  // namespace rwre

#pragma once

// Monotone coupling of the perturbed walk's e1-excursion with a reflected
// birth-death chain: Y tracks a lower bound for |X.e1| whose jump chain Z
// moves up with probability (1 - lambda/kappa)/2 away from the origin and is
// pushed up at the origin. Level hitting times of Y then dominate those of X.
//
// The thinned chain Y certifies domination but its level hitting times grow
// exponentially in the level (its drift is -lambda/kappa). A second reflected
// chain with up-probability (1 + lambda/kappa)/2 runs on the same jump clock;
// that one has the n/lambda^2 hitting-time scaling and the level-free
// top-before-origin probability of order lambda, so the scaling reports read
// it instead.

#include <cstdint>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"
#include "rwre/walk.hpp"

namespace rwre {

// P(hit -j before +i) for the biased walk from 0 with q = p_up/p_down.
// Continuous in q through q = 1 (value i/(i+j)).
double gambler_ruin(double q, int64_t i, int64_t j);

// P(never reach -j) for the up-transient walk, q = p_up/p_down > 1.
double never_visit_below(double q, int64_t j);

struct CouplingConfig {
  int64_t n_max = 4;       // record level hits up to n_max gaps
  size_t horizon = 0;      // hard step cap
};

struct CouplingRun {
  // first-passage data indexed by level n = 1..n_max; 0 = not reached
  std::vector<size_t> t_tilde;  // walk steps at first |X.e1| = n*gap
  std::vector<size_t> t_plus;   // walk steps at first X.e1 - start.e1 = +n*gap
  std::vector<size_t> t_minus;  // walk steps at first X.e1 - start.e1 = -n*gap
  std::vector<size_t> s_tilde;  // walk steps at first Y = n*gap
  std::vector<size_t> s_jump;   // e1-move count at first Y = n*gap
  std::vector<size_t> s_drift;  // e1-move count at first drift-chain visit
  size_t steps = 0;
  size_t e1_moves = 0;
  size_t clamped = 0;     // B-coin probabilities clipped into [0,1]
  size_t y_up = 0;        // Y increments taken off the origin
  size_t y_down = 0;      // Y decrements
  int64_t final_h = 0;
  int64_t final_y = 0;
  bool complete = false;  // every requested level reached by both clocks
};

// Runs the coupled pair from start, checking the parity/domination invariant
// (|X.e1 - start.e1| - Y nonnegative and even) after every step; a violation
// throws. Requires a balanced omega marginal so the auxiliary coin is a
// probability.
CouplingRun run_coupling(const PerturbedView& view, const LevelClock& clock,
                         const Point& start, const CouplingConfig& cfg,
                         Stream& rng);

// Reflected-chain quantities in lattice units, up-probability
// (1 - lambda/kappa)/2 away from 0, forced up at 0.
double z_up_probability(double lambda, double kappa);
// E[first index with Z = height | Z_0 = 0], exact tridiagonal solve.
double z_expected_hit(double lambda, double kappa, int64_t height);
// P(Z hits height before 0 | Z_0 = 1), closed form.
double z_top_probability(double lambda, double kappa, int64_t height);
// Direct simulation; returns the step count of the first visit to height.
size_t simulate_z_hit(double lambda, double kappa, int64_t height, Stream& rng,
                      size_t cap);

// Same quantities for the drift chain, up-probability (1 + lambda/kappa)/2.
double z_drift_up_probability(double lambda, double kappa);
double z_drift_expected_hit(double lambda, double kappa, int64_t height);
double z_drift_top_probability(double lambda, double kappa, int64_t height);

}  // namespace rwre

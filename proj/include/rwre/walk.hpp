#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"

namespace rwre {

// Discretization of e1-space into levels of height 1/lambda1, where
// lambda1 = 0.5 / ceil(1/(2*lambda)).  By construction 0.5/lambda1 is an
// integer, lambda1 <= lambda, and 1/(2*lambda1) < 1/(2*lambda) + 1.
struct LevelClock {
  double lambda = 0.0;
  int64_t half_gap = 1;  // 0.5/lambda1 in lattice units

  static LevelClock from_lambda(double lambda);

  double lambda1() const { return 0.5 / static_cast<double>(half_gap); }
  int64_t gap() const { return 2 * half_gap; }  // 1/lambda1
  // e1-displacement of level n relative to the walk origin.
  int64_t level_height(int64_t n) const { return n * gap(); }
};

// A nearest-neighbor path: start point plus direction indices per step.
struct WalkPath {
  Point start = origin();
  int d = 2;
  std::vector<uint8_t> steps;

  size_t length() const { return steps.size(); }
  Point position(size_t i) const;  // position after i steps (O(i))
  Point end() const { return position(steps.size()); }
  // e1-displacement after each prefix; index 0 is the start (always size()+1 entries).
  std::vector<int64_t> e1_track() const;
};

// Simulate `horizon` steps of the quenched walk under omega + lambda*xi.
WalkPath simulate(const PerturbedView& view, const Point& start, size_t horizon,
                  Stream& rng);

// First hitting data of the level grid, censored at the path end.
struct HittingReport {
  LevelClock clock;
  // T_n for n = 1..max_level (steps at which (X-X_0).e1 first equals n/lambda1).
  std::vector<size_t> up_times;
  // T_{-n} for n = 1..max_down.
  std::vector<size_t> down_times;
  size_t horizon = 0;
  bool censored_up = false;    // requested top level never reached
  bool censored_down = false;  // requested bottom level never reached

  std::optional<size_t> up(int64_t n) const;
  std::optional<size_t> down(int64_t n) const;
  // T~_n = T_n ^ T_{-n}; censored levels yield nullopt.
  std::optional<size_t> two_sided(int64_t n) const;
};

HittingReport hitting_times(const WalkPath& path, const LevelClock& clock,
                            int64_t max_up, int64_t max_down);

// Ratio a(zeta, e) = xi(e)/omega(e); bounded by 1/kappa in modulus.
double step_ratio(const SitePair& zeta, int dir);
// h(zeta) = sum_e xi(e)^2 / omega(e).
double cell_h(const SitePair& zeta);

// A window-measurable function of the environment at the particle.  All
// shipped functionals read only the cell at the particle (window = 1).
struct LocalFunction {
  std::string name;
  int window = 1;
  std::function<double(const SitePair&)> eval;

  static LocalFunction constant(double c);
  static LocalFunction xi_drift_e1();    // d(xi) . e1
  static LocalFunction omega_drift_e1(); // d(omega) . e1
  static LocalFunction omega_dir(int dir);  // omega(o, e_dir)
};

// (X_end - X_start) / steps, as a vector.
std::array<double, kMaxDim> empirical_speed(const WalkPath& path);

// Monte Carlo check that the walk at the first half-level crossing stays
// within lateral range bound/lambda: returns the fraction within range and
// displacement quantiles.
struct LateralSpreadReport {
  double fraction_within = 0.0;
  double q50 = 0.0, q90 = 0.0, q99 = 0.0;  // |X_{T_{0.5}}| quantiles
  size_t replicas = 0;
  size_t censored = 0;  // replicas that never crossed a half-level
};

LateralSpreadReport lateral_spread_check(const PerturbedView& view,
                                         const LevelClock& clock, double bound,
                                         size_t replicas, size_t horizon,
                                         uint64_t stream_key);

}  // namespace rwre

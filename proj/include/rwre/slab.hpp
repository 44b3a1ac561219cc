#pragma once

// Level-band solver: absorbing planes at two e1-heights, periodic lateral
// coordinates (torus period L). Finite surrogate for infinite-band stopping
// problems; L and the band depth are convergence knobs, probed by doubling
// tests. Exit laws, Green rows, and Doob-conditioned path sampling.

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "rwre/domain.hpp"
#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"
#include "rwre/walk.hpp"

namespace rwre {

struct Slab {
  int d = 2;
  int64_t lo = 0;      // absorbing height (absolute e1 coordinate)
  int64_t hi = 0;      // absorbing height, hi > lo + 1
  int period = 3;      // lateral torus period per transverse axis
  Point anchor{};      // lateral window center; e1 entry ignored

  int levels() const { return static_cast<int>(hi - lo - 1); }
  int lat_states() const;
  int states() const { return levels() * lat_states(); }
  void validate() const;
};

// Exit mass split by side, indexed by lateral state on each plane.
struct SlabExitLaw {
  Eigen::VectorXd bottom;
  Eigen::VectorXd top;
  double down_mass = 0;
  double up_mass = 0;
};

class SlabSystem {
 public:
  SlabSystem(const Slab& slab, const PerturbedView& view,
             SolveRoute route = SolveRoute::automatic);

  const Slab& slab() const { return slab_; }

  // State <-> lattice indexing. Points are mapped laterally modulo the torus.
  int state_of(const Point& p) const;       // -1 if height not interior
  Point point_of(int state) const;          // representative in the window
  int lat_of(const Point& p) const;         // lateral torus index
  Point top_point(int lat) const;           // boundary representative
  Point bottom_point(int lat) const;

  SlabExitLaw exit_law(const Point& start) const;
  Eigen::VectorXd green_row(const Point& start) const;

  // P_y(exit at the given top-plane lateral state) for all interior y.
  Eigen::VectorXd absorption_column_top(int lat) const;
  Eigen::VectorXd absorption_column_bottom(int lat) const;

  // Expected steps to absorption from start.
  double expected_exit_time(const Point& start) const;

  // Path conditioned to be absorbed at the target top-plane state,
  // realized as a genuine lattice path (lateral coordinates unwrapped).
  // target_h must be absorption_column_top(target_lat).
  WalkPath sample_conditioned_to_top(const Point& start, int target_lat,
                                     const Eigen::VectorXd& target_h,
                                     Stream& rng, size_t max_steps) const;

  const AbsorbingSystem& system() const { return *sys_; }

 private:
  Slab slab_;
  int nlat_;
  int two_d_;
  std::vector<std::array<double, kMaxDirs>> rows_;
  std::unique_ptr<AbsorbingSystem> sys_;

  int boundary_index(bool top, int lat) const {
    return (top ? nlat_ : 0) + lat;
  }
};

}  // namespace rwre

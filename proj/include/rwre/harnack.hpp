#pragma once

// Elliptic-Harnack probe for nearest-neighbor generators with bounded drift.
// Solves the discrete Dirichlet problem on a Euclidean lattice ball and
// measures max/min of the solution over the concentric core ball.

#include <functional>
#include <vector>

#include "rwre/domain.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

// all lattice sites with |z - center|_2 < R, deterministic order
std::vector<Point> ball_sites(int d, const Point& center, double R);

// absorbing boundary of the ball, in the same discovery order SiteListSystem
// uses when fed ball_sites(...)
std::vector<Point> ball_boundary(int d, const Point& center, double R);

struct HarnackReport {
  double max_u = 0.0;
  double min_u = 0.0;
  double ratio = 0.0;  // max_u / min_u over the core ball
  double b0 = 0.0;     // max euclidean drift norm over the interior
  int n_interior = 0;
  int n_core = 0;
  int n_boundary = 0;
};

// Dirichlet data is read on the discovered boundary sites; it must be
// nonnegative and not identically zero. Core = sites with |z - center| < sigma*R.
// Requires R*(1-sigma) > 1 so the core is separated from the boundary.
HarnackReport harnack_ratio(const PerturbedView& view, const Point& center,
                            double R, double sigma,
                            const std::function<double(const Point&)>& data,
                            SolveRoute route = SolveRoute::automatic);

struct HarnackBatch {
  std::vector<double> ratios;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double b0_max = 0.0;
  int count = 0;
};

// Random environments drawn from dist at the given perturbation size, half the
// instances with a boundary point mass, half with rough iid boundary data.
HarnackBatch harnack_batch(const EnvDistribution& dist, double lambda, double R,
                           double sigma, int count, uint64_t seed,
                           SolveRoute route = SolveRoute::automatic);

}  // namespace rwre

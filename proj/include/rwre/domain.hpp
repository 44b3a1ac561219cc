#pragma once

// Generic absorbing nearest-neighbor chain on an arbitrary finite interior
// with indexed boundary states. Callers supply the topology (interior/boundary
// adjacency) and the transition row per interior state; this class builds
// I - Q once, factors it, and answers exit-law / occupation / conditioning
// queries. Slabs, boxes, balls and 1-d ruin chains all route through here.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/linsolve.hpp"

namespace rwre {

struct NeighborRef {
  bool boundary = false;
  int index = -1;  // interior state index or boundary state index
};

// neighbor(s, dir): where does interior state s go under direction dir.
// row(s): transition probabilities over the 2d directions at state s.
struct ChainTopology {
  int d = 2;
  int n_interior = 0;
  int n_boundary = 0;
  std::function<NeighborRef(int, int)> neighbor;
  std::function<const double*(int)> row;
};

class AbsorbingSystem {
 public:
  explicit AbsorbingSystem(const ChainTopology& topo,
                           SolveRoute route = SolveRoute::automatic);

  int n_interior() const { return n_; }
  int n_boundary() const { return nb_; }

  // Expected visit counts g(start, y) for interior y (row of (I-Q)^{-1}).
  Eigen::VectorXd green_row(int start) const;
  // Absorption distribution over boundary states; sums to 1 within 1e-10.
  Eigen::VectorXd exit_law(int start) const;
  // Same, from a precomputed green row (saves the solve when both are needed).
  Eigen::VectorXd exit_law_from_green(const Eigen::VectorXd& g) const;
  // h(y) = P_y(absorbed at boundary state b); h solves (I-Q)h = R e_b.
  Eigen::VectorXd absorption_column(int b) const;
  // Expected steps to absorption from each interior state.
  Eigen::VectorXd expected_exit_time() const;

  // Solve the Dirichlet problem: u harmonic for the chain on the interior
  // with the given values on boundary states.
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& boundary_data) const;

  // One transition row of the chain together with absorption rates,
  // for conditioned sampling: probabilities over the 2d directions.
  // target_h is an absorption column; the returned row is
  // p(e) ∝ row(s,e) * h(destination), h = 1 at the target boundary state.
  std::array<double, kMaxDirs> doob_row(int s, const Eigen::VectorXd& target_h,
                                        int target_b) const;

  const ChainTopology& topo() const { return topo_; }

 private:
  ChainTopology topo_;
  int n_;
  int nb_;
  int two_d_;
  std::unique_ptr<LinearSolver> solver_;
  // boundary step rates: for each interior s, list of (boundary index, rate)
  std::vector<std::vector<std::pair<int, double>>> brates_;
  std::vector<NeighborRef> nbr_;      // cached neighbor refs, s*2d + dir
  std::vector<double> rows_;          // cached rows, s*2d + dir
};

struct PointHash {
  size_t operator()(const Point& p) const {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (int i = 0; i < kMaxDim; ++i) {
      h ^= static_cast<uint64_t>(p[i]) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<size_t>(h);
  }
};

// Absorbing chain on an explicit list of lattice sites. Interior sites take
// their transition rows from a callback; every neighbor outside the list
// becomes an absorbing boundary state, deduplicated in discovery order.
class SiteListSystem {
 public:
  SiteListSystem(int d, std::vector<Point> interior,
                 const std::function<LocalEnv(const Point&)>& row_at,
                 SolveRoute route = SolveRoute::automatic);

  int n_interior() const { return static_cast<int>(interior_.size()); }
  int n_boundary() const { return static_cast<int>(boundary_.size()); }
  const std::vector<Point>& interior() const { return interior_; }
  const std::vector<Point>& boundary() const { return boundary_; }
  int interior_index(const Point& p) const;
  int boundary_index(const Point& p) const;
  const AbsorbingSystem& system() const { return *sys_; }
  const LocalEnv& row(int s) const { return rows_[static_cast<size_t>(s)]; }

 private:
  int d_;
  std::vector<Point> interior_;
  std::vector<Point> boundary_;
  std::vector<LocalEnv> rows_;
  std::unordered_map<Point, int, PointHash> imap_;
  std::unordered_map<Point, int, PointHash> bmap_;
  std::unique_ptr<AbsorbingSystem> sys_;
};

}  // namespace rwre

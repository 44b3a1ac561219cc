#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rwre/rng.hpp"

namespace rwre {

// Nearest-neighbor lattice in dimension d (2 <= d <= 4).  Direction index
// 2i is +e_{i+1}, direction index 2i+1 is -e_{i+1}; 2d directions total.

constexpr int kMaxDim = 4;
constexpr int kMaxDirs = 2 * kMaxDim;

using Point = std::array<int64_t, kMaxDim>;

inline Point origin() { return Point{0, 0, 0, 0}; }

inline int dir_axis(int dir) { return dir >> 1; }
inline int dir_sign(int dir) { return (dir & 1) ? -1 : +1; }
inline int dir_opposite(int dir) { return dir ^ 1; }

inline void step_inplace(Point& x, int dir) { x[dir_axis(dir)] += dir_sign(dir); }

inline Point step(Point x, int dir) {
  step_inplace(x, dir);
  return x;
}

// Component of the unit vector e_dir along `axis`.
inline double dir_dot_axis(int dir, int axis) {
  return dir_axis(dir) == axis ? static_cast<double>(dir_sign(dir)) : 0.0;
}

inline double dot_ell(int dir, const std::array<double, kMaxDim>& ell) {
  return dir_sign(dir) * ell[dir_axis(dir)];
}

// One site's jump law: probabilities over the 2d directions, each >= kappa,
// summing to 1.  kappa in (0, 1/(2d)] is the uniform ellipticity floor.
struct LocalEnv {
  int d = 2;
  double kappa = 0.25;
  std::array<double, kMaxDirs> p{};

  int dirs() const { return 2 * d; }
  // Drift sum_e p(e) e.
  std::array<double, kMaxDim> drift() const;
  bool balanced(double tol = 1e-12) const;
  void validate() const;  // throws on violated row constraints
};

// One site's perturbation row: entries in [-1,1], summing to 0.
struct PerturbCell {
  int d = 2;
  std::array<double, kMaxDirs> xi{};

  int dirs() const { return 2 * d; }
  std::array<double, kMaxDim> drift() const;
  void validate() const;
};

struct SitePair {
  LocalEnv omega;
  PerturbCell xi;
};

// Per-direction drift vector of arbitrary direction-indexed values.
std::array<double, kMaxDim> local_drift(const double* f, int d);

// omega + lambda*xi as a jump law.  Requires 0 <= lambda < kappa/2; the
// result has entries > kappa/2 and rows summing to 1.
LocalEnv perturb(const SitePair& zeta, double lambda);

enum class DistKind {
  homogeneous,       // one deterministic (omega, xi) cell everywhere
  finite_support,    // iid sites, finitely many (omega, xi) atoms
  proportional,      // iid omega atoms; xi(e) = omega(e) * (e . ell)
  independent_product,  // omega and xi drawn independently per site
};

// Law of the iid environment (omega, xi) at a site.
struct EnvDistribution {
  DistKind kind = DistKind::homogeneous;
  int d = 2;
  double kappa = 0.25;

  // finite_support / homogeneous: joint atoms.
  std::vector<SitePair> atoms;
  std::vector<double> weights;

  // proportional / independent_product: omega marginal.
  std::vector<LocalEnv> omega_atoms;
  std::vector<double> omega_weights;

  // independent_product: xi marginal.
  std::vector<PerturbCell> xi_atoms;
  std::vector<double> xi_weights;

  // proportional: unit direction ell.
  std::array<double, kMaxDim> ell{1.0, 0.0, 0.0, 0.0};

  void validate() const;
  bool balanced(double tol = 1e-12) const;  // all omega rows drift-free

  // Mean perturbation drift E[d(xi)] (exact over atoms).
  std::array<double, kMaxDim> mean_xi_drift() const;

  // Convenience builders for common cells.
  static EnvDistribution homogeneous_cell(const LocalEnv& w, const PerturbCell& x);
  static EnvDistribution proportional(std::vector<LocalEnv> omega_atoms,
                                      std::vector<double> omega_weights,
                                      const std::array<double, kMaxDim>& ell,
                                      double kappa);
};

// Simple-random-walk row in dimension d.
LocalEnv simple_walk_cell(int d);
// xi(e) = omega(e) * (e . ell) for a given row.
PerturbCell proportional_cell(const LocalEnv& w, const std::array<double, kMaxDim>& ell);

// The realized environment: site(x) is a pure function of (master_seed, x),
// so revisits agree and field reads are safe from any thread.
class EnvironmentField {
 public:
  EnvironmentField(EnvDistribution dist, uint64_t master_seed);

  const EnvDistribution& dist() const { return dist_; }
  uint64_t master_seed() const { return seed_; }
  int d() const { return dist_.d; }
  double kappa() const { return dist_.kappa; }

  SitePair site(const Point& x) const;

 private:
  EnvDistribution dist_;
  uint64_t seed_;
  uint64_t omega_key_;
  uint64_t xi_key_;
};

// Environment shifted to the walker: theta^x zeta evaluated at the origin.
// A local function of the environment at the particle reads through this.
class ParticleView {
 public:
  ParticleView(const EnvironmentField& field, Point x) : field_(&field), x_(x) {}
  SitePair at_origin() const { return field_->site(x_); }
  SitePair at(const Point& rel) const;
  const Point& center() const { return x_; }

 private:
  const EnvironmentField* field_;
  Point x_;
};

// The perturbed law omega + lambda*xi read off a field.
class PerturbedView {
 public:
  PerturbedView(const EnvironmentField& field, double lambda);

  const EnvironmentField& field() const { return *field_; }
  double lambda() const { return lambda_; }
  int d() const { return field_->d(); }

  LocalEnv row(const Point& x) const { return perturb(field_->site(x), lambda_); }

 private:
  const EnvironmentField* field_;
  double lambda_;
};

}  // namespace rwre

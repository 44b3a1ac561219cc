#include "rwre/slab.hpp"

#include "rwre/check.hpp"

namespace rwre {

namespace {

// positive modulus
inline int pmod(int64_t v, int m) {
  int r = static_cast<int>(v % m);
  return r < 0 ? r + m : r;
}

// torus index -> signed offset nearest zero, so the window is centered on the
// anchor
inline int centered(int o, int m) { return o <= m / 2 ? o : o - m; }

}  // namespace

int Slab::lat_states() const {
  int n = 1;
  for (int j = 1; j < d; ++j) n *= period;
  return n;
}

void Slab::validate() const {
  RWRE_CHECK_MSG(d >= 1 && d <= kMaxDim, "slab dimension out of range");
  RWRE_CHECK_MSG(hi - lo >= 2, "slab needs a nonempty interior");
  RWRE_CHECK_MSG(d == 1 || period >= 3, "lateral period too small");
}

SlabSystem::SlabSystem(const Slab& slab, const PerturbedView& view,
                       SolveRoute route)
    : slab_(slab), nlat_(slab.lat_states()), two_d_(2 * slab.d) {
  slab_.validate();
  RWRE_CHECK(view.field().d() == slab_.d);
  int n = slab_.states();
  rows_.resize(n);
  for (int s = 0; s < n; ++s) {
    LocalEnv env = view.row(point_of(s));
    for (int k = 0; k < two_d_; ++k) rows_[s][k] = env.p[k];
  }
  ChainTopology topo;
  topo.d = slab_.d;
  topo.n_interior = n;
  topo.n_boundary = 2 * nlat_;
  topo.row = [this](int s) { return rows_[s].data(); };
  topo.neighbor = [this](int s, int k) {
    Point p = point_of(s);
    step_inplace(p, k);
    NeighborRef ref;
    if (p[0] <= slab_.lo) {
      ref.boundary = true;
      ref.index = boundary_index(false, lat_of(p));
    } else if (p[0] >= slab_.hi) {
      ref.boundary = true;
      ref.index = boundary_index(true, lat_of(p));
    } else {
      ref.boundary = false;
      ref.index = state_of(p);
    }
    return ref;
  };
  sys_ = std::make_unique<AbsorbingSystem>(topo, route);
}

int SlabSystem::lat_of(const Point& p) const {
  int lat = 0;
  for (int j = slab_.d - 1; j >= 1; --j)
    lat = lat * slab_.period + pmod(p[j] - slab_.anchor[j], slab_.period);
  return lat;
}

int SlabSystem::state_of(const Point& p) const {
  if (p[0] <= slab_.lo || p[0] >= slab_.hi) return -1;
  return static_cast<int>(p[0] - slab_.lo - 1) * nlat_ + lat_of(p);
}

Point SlabSystem::point_of(int state) const {
  Point p{};
  p[0] = slab_.lo + 1 + state / nlat_;
  int lat = state % nlat_;
  for (int j = 1; j < slab_.d; ++j) {
    p[j] = slab_.anchor[j] + centered(lat % slab_.period, slab_.period);
    lat /= slab_.period;
  }
  return p;
}

Point SlabSystem::top_point(int lat) const {
  Point p{};
  p[0] = slab_.hi;
  for (int j = 1; j < slab_.d; ++j) {
    p[j] = slab_.anchor[j] + centered(lat % slab_.period, slab_.period);
    lat /= slab_.period;
  }
  return p;
}

Point SlabSystem::bottom_point(int lat) const {
  Point p = top_point(lat);
  p[0] = slab_.lo;
  return p;
}

SlabExitLaw SlabSystem::exit_law(const Point& start) const {
  int s = state_of(start);
  RWRE_CHECK_MSG(s >= 0, "slab exit law: start not interior");
  Eigen::VectorXd law = sys_->exit_law(s);
  SlabExitLaw out;
  out.bottom = law.head(nlat_);
  out.top = law.tail(nlat_);
  out.down_mass = out.bottom.sum();
  out.up_mass = out.top.sum();
  RWRE_CHECK_MSG(std::abs(out.down_mass + out.up_mass - 1.0) <= 1e-10,
                 "slab exit law mass defect");
  return out;
}

Eigen::VectorXd SlabSystem::green_row(const Point& start) const {
  int s = state_of(start);
  RWRE_CHECK_MSG(s >= 0, "slab green row: start not interior");
  return sys_->green_row(s);
}

Eigen::VectorXd SlabSystem::absorption_column_top(int lat) const {
  return sys_->absorption_column(boundary_index(true, lat));
}

Eigen::VectorXd SlabSystem::absorption_column_bottom(int lat) const {
  return sys_->absorption_column(boundary_index(false, lat));
}

double SlabSystem::expected_exit_time(const Point& start) const {
  int s = state_of(start);
  RWRE_CHECK_MSG(s >= 0, "slab exit time: start not interior");
  return sys_->expected_exit_time()[s];
}

WalkPath SlabSystem::sample_conditioned_to_top(const Point& start,
                                               int target_lat,
                                               const Eigen::VectorXd& target_h,
                                               Stream& rng,
                                               size_t max_steps) const {
  int s = state_of(start);
  RWRE_CHECK_MSG(s >= 0, "conditioned sample: start not interior");
  RWRE_CHECK_MSG(target_h[s] > 0.0, "conditioned sample: zero-mass target");
  WalkPath path;
  path.start = start;
  path.d = slab_.d;
  Point pos = start;  // unwrapped lattice coordinates
  int target_b = boundary_index(true, target_lat);
  for (size_t i = 0; i < max_steps; ++i) {
    auto w = sys_->doob_row(s, target_h, target_b);
    int dir = rng.categorical(w.data(), two_d_);
    path.steps.push_back(static_cast<uint8_t>(dir));
    step_inplace(pos, dir);
    if (pos[0] >= slab_.hi) {
      RWRE_CHECK_MSG(lat_of(pos) == target_lat,
                     "conditioned sample exited off target");
      return path;
    }
    RWRE_CHECK(pos[0] > slab_.lo);
    s = state_of(pos);
  }
  throw std::runtime_error("conditioned sample exceeded step budget");
}

}  // namespace rwre

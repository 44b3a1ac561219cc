#include "rwre/walk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rwre/check.hpp"

namespace rwre {

LevelClock LevelClock::from_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("level clock needs lambda > 0");
  LevelClock c;
  c.lambda = lambda;
  c.half_gap = static_cast<int64_t>(std::ceil(1.0 / (2.0 * lambda)));
  RWRE_CHECK(c.half_gap >= 1);
  RWRE_CHECK(c.lambda1() <= lambda + 1e-15);
  return c;
}

Point WalkPath::position(size_t i) const {
  RWRE_CHECK(i <= steps.size());
  Point x = start;
  for (size_t k = 0; k < i; ++k) step_inplace(x, steps[k]);
  return x;
}

std::vector<int64_t> WalkPath::e1_track() const {
  std::vector<int64_t> track(steps.size() + 1);
  int64_t v = start[0];
  track[0] = v;
  for (size_t k = 0; k < steps.size(); ++k) {
    v += (dir_axis(steps[k]) == 0) ? dir_sign(steps[k]) : 0;
    track[k + 1] = v;
  }
  return track;
}

WalkPath simulate(const PerturbedView& view, const Point& start, size_t horizon,
                  Stream& rng) {
  WalkPath path;
  path.start = start;
  path.d = view.d();
  path.steps.reserve(horizon);
  Point x = start;
  const int dirs = 2 * view.d();
  for (size_t i = 0; i < horizon; ++i) {
    LocalEnv row = view.row(x);
    int dir = rng.categorical(row.p.data(), dirs);
    path.steps.push_back(static_cast<uint8_t>(dir));
    step_inplace(x, dir);
  }
  return path;
}

std::optional<size_t> HittingReport::up(int64_t n) const {
  RWRE_CHECK(n >= 1);
  if (n > static_cast<int64_t>(up_times.size())) return std::nullopt;
  size_t t = up_times[n - 1];
  if (t == std::numeric_limits<size_t>::max()) return std::nullopt;
  return t;
}

std::optional<size_t> HittingReport::down(int64_t n) const {
  RWRE_CHECK(n >= 1);
  if (n > static_cast<int64_t>(down_times.size())) return std::nullopt;
  size_t t = down_times[n - 1];
  if (t == std::numeric_limits<size_t>::max()) return std::nullopt;
  return t;
}

std::optional<size_t> HittingReport::two_sided(int64_t n) const {
  auto u = up(n);
  auto v = down(n);
  if (u && v) return std::min(*u, *v);
  if (u) return u;
  return v;
}

HittingReport hitting_times(const WalkPath& path, const LevelClock& clock,
                            int64_t max_up, int64_t max_down) {
  constexpr size_t kUnset = std::numeric_limits<size_t>::max();
  HittingReport rep;
  rep.clock = clock;
  rep.horizon = path.length();
  rep.up_times.assign(static_cast<size_t>(std::max<int64_t>(max_up, 0)), kUnset);
  rep.down_times.assign(static_cast<size_t>(std::max<int64_t>(max_down, 0)), kUnset);
  const int64_t gap = clock.gap();
  int64_t disp = 0;
  for (size_t i = 0; i < path.steps.size(); ++i) {
    int dir = path.steps[i];
    if (dir_axis(dir) != 0) continue;
    disp += dir_sign(dir);
    if (disp > 0 && disp % gap == 0) {
      int64_t n = disp / gap;
      if (n >= 1 && n <= max_up && rep.up_times[n - 1] == kUnset)
        rep.up_times[n - 1] = i + 1;
    } else if (disp < 0 && (-disp) % gap == 0) {
      int64_t n = -disp / gap;
      if (n >= 1 && n <= max_down && rep.down_times[n - 1] == kUnset)
        rep.down_times[n - 1] = i + 1;
    }
  }
  rep.censored_up = max_up > 0 && rep.up_times[max_up - 1] == kUnset;
  rep.censored_down = max_down > 0 && rep.down_times[max_down - 1] == kUnset;
  return rep;
}

double step_ratio(const SitePair& zeta, int dir) {
  double w = zeta.omega.p[dir];
  RWRE_CHECK(w > 0.0);
  double a = zeta.xi.xi[dir] / w;
  RWRE_CHECK_MSG(std::abs(a) <= 1.0 / zeta.omega.kappa + 1e-9,
                 "step ratio exceeds 1/kappa");
  return a;
}

double cell_h(const SitePair& zeta) {
  double h = 0.0;
  for (int e = 0; e < zeta.omega.dirs(); ++e)
    h += zeta.xi.xi[e] * zeta.xi.xi[e] / zeta.omega.p[e];
  return h;
}

LocalFunction LocalFunction::constant(double c) {
  return LocalFunction{"const", 1, [c](const SitePair&) { return c; }};
}

LocalFunction LocalFunction::xi_drift_e1() {
  return LocalFunction{"xi_drift_e1", 1,
                       [](const SitePair& z) { return z.xi.drift()[0]; }};
}

LocalFunction LocalFunction::omega_drift_e1() {
  return LocalFunction{"omega_drift_e1", 1,
                       [](const SitePair& z) { return z.omega.drift()[0]; }};
}

LocalFunction LocalFunction::omega_dir(int dir) {
  return LocalFunction{"omega_dir" + std::to_string(dir), 1,
                       [dir](const SitePair& z) { return z.omega.p[dir]; }};
}

std::array<double, kMaxDim> empirical_speed(const WalkPath& path) {
  RWRE_CHECK(path.length() > 0);
  Point e = path.end();
  std::array<double, kMaxDim> v{0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < path.d; ++i)
    v[i] = static_cast<double>(e[i] - path.start[i]) / static_cast<double>(path.length());
  return v;
}

LateralSpreadReport lateral_spread_check(const PerturbedView& view,
                                         const LevelClock& clock, double bound,
                                         size_t replicas, size_t horizon,
                                         uint64_t stream_key) {
  LateralSpreadReport rep;
  rep.replicas = replicas;
  std::vector<double> norms;
  norms.reserve(replicas);
  const double limit = bound / clock.lambda;
  size_t within = 0;
  for (size_t r = 0; r < replicas; ++r) {
    Stream rng(derive_key({stream_key, static_cast<uint64_t>(Role::walk), r}));
    Point x = origin();
    int64_t disp = 0;
    bool crossed = false;
    for (size_t i = 0; i < horizon; ++i) {
      LocalEnv row = view.row(x);
      int dir = rng.categorical(row.p.data(), 2 * view.d());
      step_inplace(x, dir);
      if (dir_axis(dir) == 0) {
        disp += dir_sign(dir);
        if (std::llabs(disp) == clock.half_gap) {
          crossed = true;
          break;
        }
      }
    }
    if (!crossed) {
      ++rep.censored;
      continue;
    }
    double n2 = 0.0;
    for (int i = 0; i < view.d(); ++i) n2 += static_cast<double>(x[i]) * x[i];
    double norm = std::sqrt(n2);
    norms.push_back(norm);
    if (norm < limit) ++within;
  }
  if (!norms.empty()) {
    std::sort(norms.begin(), norms.end());
    auto quant = [&](double q) {
      size_t idx = static_cast<size_t>(q * (norms.size() - 1));
      return norms[idx];
    };
    rep.fraction_within = static_cast<double>(within) / static_cast<double>(replicas);
    rep.q50 = quant(0.5);
    rep.q90 = quant(0.9);
    rep.q99 = quant(0.99);
  }
  return rep;
}

}  // namespace rwre

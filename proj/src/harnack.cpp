#include "rwre/harnack.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/check.hpp"
#include "rwre/rng.hpp"

namespace rwre {

std::vector<Point> ball_sites(int d, const Point& center, double R) {
  RWRE_CHECK(d >= 1 && d <= kMaxDim);
  RWRE_CHECK(R > 1.0);
  const int64_t r = static_cast<int64_t>(std::floor(R));
  const double r2 = R * R;
  std::vector<Point> out;
  Point z = center;
  std::function<void(int)> rec = [&](int axis) {
    if (axis == d) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        const double dz = static_cast<double>(z[j] - center[j]);
        s += dz * dz;
      }
      if (s < r2) out.push_back(z);
      return;
    }
    for (int64_t c = center[axis] - r; c <= center[axis] + r; ++c) {
      z[axis] = c;
      rec(axis + 1);
    }
    z[axis] = center[axis];
  };
  rec(0);
  return out;
}

std::vector<Point> ball_boundary(int d, const Point& center, double R) {
  auto sites = ball_sites(d, center, R);
  std::unordered_map<Point, int, PointHash> in;
  for (size_t s = 0; s < sites.size(); ++s) in.emplace(sites[s], static_cast<int>(s));
  std::vector<Point> out;
  std::unordered_map<Point, int, PointHash> seen;
  for (const Point& p : sites) {
    for (int dir = 0; dir < 2 * d; ++dir) {
      Point q = step(p, dir);
      if (in.count(q)) continue;
      auto [it, fresh] = seen.emplace(q, static_cast<int>(out.size()));
      if (fresh) out.push_back(q);
    }
  }
  return out;
}

HarnackReport harnack_ratio(const PerturbedView& view, const Point& center,
                            double R, double sigma,
                            const std::function<double(const Point&)>& data,
                            SolveRoute route) {
  RWRE_CHECK(sigma > 0.0 && sigma < 1.0);
  RWRE_CHECK_MSG(R * (1.0 - sigma) > 1.0, "core ball touches the boundary");
  const int d = view.field().d();
  auto sites = ball_sites(d, center, R);
  SiteListSystem sls(d, std::move(sites),
                     [&](const Point& p) { return view.row(p); }, route);

  Eigen::VectorXd bdata(sls.n_boundary());
  double mass = 0.0;
  for (int b = 0; b < sls.n_boundary(); ++b) {
    const double v = data(sls.boundary()[static_cast<size_t>(b)]);
    RWRE_CHECK_MSG(v >= 0.0, "harnack data must be nonnegative");
    bdata[b] = v;
    mass += v;
  }
  RWRE_CHECK_MSG(mass > 0.0, "harnack data identically zero");

  Eigen::VectorXd u = sls.system().dirichlet(bdata);

  HarnackReport rep;
  rep.n_interior = sls.n_interior();
  rep.n_boundary = sls.n_boundary();
  const double core2 = sigma * R * sigma * R;
  bool first = true;
  for (int s = 0; s < sls.n_interior(); ++s) {
    const Point& p = sls.interior()[static_cast<size_t>(s)];
    double dist2 = 0.0;
    for (int j = 0; j < d; ++j) {
      const double dz = static_cast<double>(p[j] - center[j]);
      dist2 += dz * dz;
    }
    const LocalEnv& row = sls.row(s);
    double bn = 0.0;
    for (int j = 0; j < d; ++j) {
      const double bj = row.p[2 * j] - row.p[2 * j + 1];
      bn += bj * bj;
    }
    rep.b0 = std::max(rep.b0, std::sqrt(bn));
    if (dist2 >= core2) continue;
    ++rep.n_core;
    if (first || u[s] > rep.max_u) rep.max_u = u[s];
    if (first || u[s] < rep.min_u) rep.min_u = u[s];
    first = false;
  }
  RWRE_CHECK(rep.n_core > 0);
  RWRE_CHECK_MSG(rep.min_u > 0.0, "nonpositive minimum for nonnegative data");
  rep.ratio = rep.max_u / rep.min_u;
  return rep;
}

HarnackBatch harnack_batch(const EnvDistribution& dist, double lambda, double R,
                           double sigma, int count, uint64_t seed,
                           SolveRoute route) {
  RWRE_CHECK(count > 0);
  HarnackBatch batch;
  Point center{};
  const int d = dist.d;
  // boundary geometry is identical across instances, enumerate it once
  const auto bnd = ball_boundary(d, center, R);
  RWRE_CHECK(!bnd.empty());
  double sum = 0.0;
  for (int i = 0; i < count; ++i) {
    EnvironmentField field(dist, derive_key({seed, static_cast<uint64_t>(i) + 1}));
    PerturbedView view(field, lambda);
    Stream data_rng(role_key(derive_key({seed, static_cast<uint64_t>(i)}), Role::data));
    HarnackReport rep;
    if (i % 2 == 0) {
      // point mass at a random boundary site: worst-case data shape
      const Point target =
          bnd[static_cast<size_t>(data_rng.next_bits() % bnd.size())];
      rep = harnack_ratio(
          view, center, R, sigma,
          [&](const Point& p) { return p == target ? 1.0 : 0.0; }, route);
    } else {
      // rough iid data, skewed toward small values
      const uint64_t salt = data_rng.next_bits();
      PointHash h;
      rep = harnack_ratio(
          view, center, R, sigma,
          [&](const Point& p) {
            const double v = to_unit(mix64(static_cast<uint64_t>(h(p)) ^ salt));
            return v * v * v;
          },
          route);
    }
    batch.ratios.push_back(rep.ratio);
    batch.b0_max = std::max(batch.b0_max, rep.b0);
    batch.max_ratio = std::max(batch.max_ratio, rep.ratio);
    sum += rep.ratio;
  }
  batch.count = count;
  batch.mean_ratio = sum / count;
  return batch;
}

}  // namespace rwre

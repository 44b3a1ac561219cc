#include "rwre/girsanov.hpp"

#include <cmath>

#include "rwre/check.hpp"

namespace rwre {

GirsanovWeight log_weight(const EnvironmentField& field, const WalkPath& path,
                          double lambda) {
  GirsanovWeight g;
  g.steps = path.length();
  Point x = path.start;
  for (uint8_t dir : path.steps) {
    SitePair zeta = field.site(x);
    double factor = 1.0 + lambda * step_ratio(zeta, dir);
    RWRE_CHECK_MSG(factor > 0.0, "Girsanov factor must stay positive");
    g.min_factor = std::min(g.min_factor, factor);
    g.log_weight += std::log(factor);
    step_inplace(x, dir);
  }
  return g;
}

TaylorSplit taylor_split(const EnvironmentField& field, const WalkPath& path,
                         double lambda) {
  TaylorSplit t;
  t.steps = path.length();
  t.h_bound = (1.0 + 1.0 / field.kappa()) / 3.0;
  double sum_a = 0.0, sum_a2 = 0.0, total = 0.0;
  Point x = path.start;
  for (uint8_t dir : path.steps) {
    SitePair zeta = field.site(x);
    double a = step_ratio(zeta, dir);
    sum_a += a;
    sum_a2 += a * a;
    total += std::log(1.0 + lambda * a);
    step_inplace(x, dir);
  }
  t.linear = lambda * sum_a;
  t.quadratic = -0.5 * lambda * lambda * sum_a2;
  t.remainder = total - t.linear - t.quadratic;
  if (t.steps > 0 && lambda > 0.0)
    t.h_term = t.remainder / (lambda * lambda * lambda * static_cast<double>(t.steps));
  return t;
}

namespace {

// Depth-first sum over all (2d)^n continuations of prob * weight.
double enumerate_weighted(const EnvironmentField& field, Point x, double lambda,
                          int remaining, double prob_times_weight, size_t* count) {
  if (remaining == 0) {
    ++*count;
    return prob_times_weight;
  }
  SitePair zeta = field.site(x);
  double total = 0.0;
  for (int dir = 0; dir < zeta.omega.dirs(); ++dir) {
    // omega(x,e) * (1 + lambda a(x,e)) = omega(x,e) + lambda xi(x,e).
    double w = prob_times_weight * (zeta.omega.p[dir] + lambda * zeta.xi.xi[dir]);
    Point y = step(x, dir);
    total += enumerate_weighted(field, y, lambda, remaining - 1, w, count);
  }
  return total;
}

}  // namespace

UnitMeanReport unit_mean_oracle(const EnvironmentField& field, const Point& start,
                                double lambda, int n_steps) {
  RWRE_CHECK_MSG(n_steps >= 1 && n_steps <= 10, "enumeration depth out of budget");
  UnitMeanReport rep;
  rep.value = enumerate_weighted(field, start, lambda, n_steps, 1.0, &rep.paths);
  return rep;
}

ReweightedEstimate reweighted_block_estimator(const EnvironmentField& field,
                                              const LocalFunction& f, double lambda,
                                              double t, size_t replicas,
                                              uint64_t stream_key, double min_ess) {
  RWRE_CHECK(t > 0.0 && lambda > 0.0);
  ReweightedEstimate est;
  est.replicas = replicas;
  const size_t m = static_cast<size_t>(std::ceil(t / (lambda * lambda)));
  est.block_steps = m;
  const double scale = lambda * lambda / t;
  const int dirs = 2 * field.d();

  std::vector<double> direct(replicas), reweighted_f(replicas), weights(replicas);
  for (size_t r = 0; r < replicas; ++r) {
    // Direct route: dynamics under omega + lambda*xi.
    {
      Stream rng(derive_key({stream_key, static_cast<uint64_t>(Role::walk), r, 1}));
      Point x = origin();
      double acc = f.eval(field.site(x));
      for (size_t i = 0; i < m; ++i) {
        SitePair zeta = field.site(x);
        LocalEnv row = perturb(zeta, lambda);
        int dir = rng.categorical(row.p.data(), dirs);
        step_inplace(x, dir);
        acc += f.eval(field.site(x));
      }
      direct[r] = scale * acc;
    }
    // Reweighted route: base dynamics, e^G weight.
    {
      Stream rng(derive_key({stream_key, static_cast<uint64_t>(Role::walk), r, 2}));
      Point x = origin();
      double acc = f.eval(field.site(x));
      double logw = 0.0;
      for (size_t i = 0; i < m; ++i) {
        SitePair zeta = field.site(x);
        int dir = rng.categorical(zeta.omega.p.data(), dirs);
        logw += std::log(1.0 + lambda * step_ratio(zeta, dir));
        step_inplace(x, dir);
        acc += f.eval(field.site(x));
      }
      weights[r] = std::exp(logw);
      reweighted_f[r] = scale * acc;
    }
  }

  auto mean_stderr = [](const std::vector<double>& v, double* mean, double* se) {
    double m1 = 0.0;
    for (double x : v) m1 += x;
    m1 /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m1) * (x - m1);
    s2 /= static_cast<double>(v.size() - 1);
    *mean = m1;
    *se = std::sqrt(s2 / static_cast<double>(v.size()));
  };
  mean_stderr(direct, &est.direct_mean, &est.direct_stderr);

  double wsum = 0.0, w2sum = 0.0;
  for (double w : weights) {
    wsum += w;
    w2sum += w * w;
  }
  est.ess = wsum * wsum / w2sum;
  if (est.ess < min_ess) {
    est.refused = true;
    return est;
  }
  // Self-normalized weighted average: exact on constants, and the mean-one
  // property of the weights keeps the normalization near 1.
  double num = 0.0;
  for (size_t r = 0; r < replicas; ++r) num += weights[r] * reweighted_f[r];
  est.reweighted_mean = num / wsum;
  const double wbar = wsum / static_cast<double>(replicas);
  double s2 = 0.0;
  for (size_t r = 0; r < replicas; ++r) {
    const double u = weights[r] * (reweighted_f[r] - est.reweighted_mean);
    s2 += u * u;
  }
  s2 /= static_cast<double>(replicas - 1);
  est.reweighted_stderr =
      std::sqrt(s2 / static_cast<double>(replicas)) / wbar;
  return est;
}

}  // namespace rwre

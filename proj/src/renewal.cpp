#include "rwre/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rwre/check.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {
double point_dot(const Point& p, const std::array<double, kMaxDim>& ell) {
  double v = 0;
  for (int i = 0; i < kMaxDim; ++i) v += static_cast<double>(p[i]) * ell[i];
  return v;
}
}  // namespace

namespace {

struct ReplicaBlocks {
  // per inter-renewal block: length, per-f sums, a-kernel sum
  std::vector<double> len;
  std::vector<std::vector<double>> fsum;  // [f][block]
  std::vector<double> asum;
  double post1_len = 0.0;
  std::vector<double> post1_fsum;  // [f]
  size_t renewals = 0;
  size_t steps = 0;
};

}  // namespace

RenewalScan detect_renewals(const std::vector<double>& proj,
                            size_t confirm_window) {
  RWRE_CHECK(proj.size() >= 2);
  const size_t n = proj.size();
  RenewalScan scan;
  // strict minimum of everything to the right
  std::vector<double> smin(n);
  double run = std::numeric_limits<double>::infinity();
  for (size_t i = n; i-- > 0;) {
    smin[i] = run;
    run = std::min(run, proj[i]);
  }
  double pmax = -std::numeric_limits<double>::infinity();
  const size_t last = n - 1;
  for (size_t t = 0; t < n; ++t) {
    if (pmax < proj[t] && proj[t] < smin[t]) {
      if (last - t >= confirm_window) {
        scan.times.push_back(t);
      } else {
        ++scan.censored;
      }
    }
    pmax = std::max(pmax, proj[t]);
  }
  return scan;
}

LambdaSuite lambda_operator_suite(const EnvDistribution& dist,
                                  const std::vector<LocalFunction>& fs,
                                  uint64_t seed, const LambdaParams& prm) {
  dist.validate();
  RWRE_CHECK(!fs.empty());
  RWRE_CHECK(prm.replicas >= 2);
  RWRE_CHECK(prm.n_f >= 0);
  const size_t nf = fs.size();
  const int n_lag = prm.n_f;

  std::vector<ReplicaBlocks> reps;
  reps.reserve(prm.replicas);
  size_t total_steps = 0;
  size_t total_renewals = 0;

  for (size_t r = 0; r < prm.replicas; ++r) {
    EnvironmentField field(dist, derive_key({seed, r + 1}));
    PerturbedView view(field, prm.lambda);
    Stream rng(derive_key({role_key(seed, Role::walk), r}));
    WalkPath path = simulate(view, origin(), prm.horizon, rng);

    // projections and per-step reads in one pass
    const size_t steps = path.length();
    std::vector<double> proj(steps + 1);
    std::vector<std::vector<double>> fv(nf, std::vector<double>(steps));
    std::vector<double> av(steps);
    Point pos = path.start;
    proj[0] = point_dot(pos, prm.ell);
    for (size_t i = 0; i < steps; ++i) {
      SitePair zeta = field.site(pos);
      for (size_t f = 0; f < nf; ++f) fv[f][i] = fs[f].eval(zeta);
      av[i] = step_ratio(zeta, path.steps[i]);
      step_inplace(pos, path.steps[i]);
      proj[i + 1] = point_dot(pos, prm.ell);
    }

    RenewalScan scan = detect_renewals(proj, prm.confirm_window);
    ReplicaBlocks rb;
    rb.steps = steps;
    rb.renewals = scan.times.size();
    rb.post1_fsum.assign(nf, 0.0);
    if (!scan.times.empty()) {
      const size_t t1 = scan.times.front();
      rb.post1_len = static_cast<double>(steps - t1);
      for (size_t i = t1; i < steps; ++i)
        for (size_t f = 0; f < nf; ++f) rb.post1_fsum[f] += fv[f][i];
      const size_t m = scan.times.size() - 1;  // inter-renewal blocks
      rb.len.resize(m);
      rb.asum.assign(m, 0.0);
      rb.fsum.assign(nf, std::vector<double>(m, 0.0));
      for (size_t b = 0; b < m; ++b) {
        const size_t a0 = scan.times[b];
        const size_t a1 = scan.times[b + 1];
        rb.len[b] = static_cast<double>(a1 - a0);
        for (size_t i = a0; i < a1; ++i) {
          rb.asum[b] += av[i];
          for (size_t f = 0; f < nf; ++f) rb.fsum[f][b] += fv[f][i];
        }
      }
    }
    total_steps += steps;
    total_renewals += rb.renewals;
    reps.push_back(std::move(rb));
  }

  LambdaSuite suite;
  suite.renewal_density =
      total_steps > 0
          ? static_cast<double>(total_renewals) / static_cast<double>(total_steps)
          : 0.0;
  size_t blocks_total = 0;
  for (const auto& rb : reps) blocks_total += rb.len.size();
  suite.blocks_total = blocks_total;
  if (blocks_total < prm.min_blocks) {
    suite.ballistic = false;
    return suite;
  }

  // Per-replica linear aggregates. With Ucentered = fsum - q*len and
  // V = asum, every lag term is linear in q, so bootstrap resamples reuse
  // these sums exactly.
  struct Agg {
    // index 0 = diagonal term, t = 1..n_lag the symmetrized lag-t term
    std::vector<double> fa;   // [f*(n_lag+1) + t]: sum of fsum*asum pairings
    std::vector<double> la;   // [t]: sum of len*asum pairings
    std::vector<double> cnt;  // [t]: pair count
    double len_sum = 0.0;
    double len_cnt = 0.0;
  };
  std::vector<Agg> aggs(reps.size());
  for (size_t r = 0; r < reps.size(); ++r) {
    const auto& rb = reps[r];
    Agg& ag = aggs[r];
    ag.fa.assign(nf * (static_cast<size_t>(n_lag) + 1), 0.0);
    ag.la.assign(static_cast<size_t>(n_lag) + 1, 0.0);
    ag.cnt.assign(static_cast<size_t>(n_lag) + 1, 0.0);
    const size_t m = rb.len.size();
    for (double l : rb.len) ag.len_sum += l;
    ag.len_cnt = static_cast<double>(m);
    const size_t base = static_cast<size_t>(n_lag);
    for (size_t t = 0; t <= static_cast<size_t>(n_lag); ++t) {
      if (m < base + t + 1) continue;
      for (size_t a = base; a + t < m; ++a) {
        const size_t b = a + t;
        if (t == 0) {
          ag.la[0] += rb.len[a] * rb.asum[a];
          for (size_t f = 0; f < nf; ++f)
            ag.fa[f * (static_cast<size_t>(n_lag) + 1)] +=
                rb.fsum[f][a] * rb.asum[a];
          ag.cnt[0] += 1.0;
        } else {
          // U_j V_{j+t} + U_{j+t} V_j
          ag.la[t] += rb.len[a] * rb.asum[b] + rb.len[b] * rb.asum[a];
          for (size_t f = 0; f < nf; ++f)
            ag.fa[f * (static_cast<size_t>(n_lag) + 1) + t] +=
                rb.fsum[f][a] * rb.asum[b] + rb.fsum[f][b] * rb.asum[a];
          ag.cnt[t] += 1.0;
        }
      }
    }
  }

  auto pooled = [&](const std::vector<size_t>& pick, size_t f) {
    double p1f = 0.0;
    double p1l = 0.0;
    for (size_t r : pick) {
      p1f += reps[r].post1_fsum[f];
      p1l += reps[r].post1_len;
    }
    const double q = p1l > 0.0 ? p1f / p1l : 0.0;
    double numer = 0.0;
    double len_sum = 0.0;
    double len_cnt = 0.0;
    for (size_t t = 0; t <= static_cast<size_t>(n_lag); ++t) {
      double fa = 0.0;
      double la = 0.0;
      double cn = 0.0;
      for (size_t r : pick) {
        fa += aggs[r].fa[f * (static_cast<size_t>(n_lag) + 1) + t];
        la += aggs[r].la[t];
        cn += aggs[r].cnt[t];
      }
      if (cn > 0.0) numer += (fa - q * la) / cn;
    }
    for (size_t r : pick) {
      len_sum += aggs[r].len_sum;
      len_cnt += aggs[r].len_cnt;
    }
    const double mean_len = len_cnt > 0.0 ? len_sum / len_cnt : 1.0;
    return std::pair<double, double>(numer / mean_len, q);
  };

  std::vector<size_t> all(reps.size());
  for (size_t r = 0; r < reps.size(); ++r) all[r] = r;
  {
    double len_sum = 0.0;
    double len_cnt = 0.0;
    for (const auto& ag : aggs) {
      len_sum += ag.len_sum;
      len_cnt += ag.len_cnt;
    }
    suite.mean_block_steps = len_cnt > 0.0 ? len_sum / len_cnt : 0.0;
  }

  Stream boot(role_key(seed, Role::bootstrap));
  std::vector<std::vector<size_t>> resamples(prm.bootstrap, all);
  for (auto& pick : resamples) {
    for (size_t i = 0; i < pick.size(); ++i)
      pick[i] = static_cast<size_t>(boot.next_bits() % reps.size());
  }

  for (size_t f = 0; f < nf; ++f) {
    LambdaEstimate est;
    est.name = fs[f].name;
    auto [value, q] = pooled(all, f);
    est.value = value;
    est.q_hat = q;
    double s1 = 0.0;
    double s2 = 0.0;
    for (const auto& pick : resamples) {
      const double v = pooled(pick, f).first;
      s1 += v;
      s2 += v * v;
    }
    const double bn = static_cast<double>(resamples.size());
    const double var = std::max(0.0, s2 / bn - (s1 / bn) * (s1 / bn));
    const double sd = std::sqrt(var);
    est.ci_low = value - 3.0 * sd;
    est.ci_high = value + 3.0 * sd;
    suite.per_f.push_back(std::move(est));
  }
  return suite;
}

SpeedDerivativeReport speed_derivative(const EnvDistribution& dist,
                                       const std::vector<double>& lambdas,
                                       size_t replicas, size_t horizon,
                                       uint64_t seed) {
  dist.validate();
  RWRE_CHECK(!lambdas.empty());
  RWRE_CHECK(replicas >= 2);
  for (double l : lambdas) RWRE_CHECK(l > 0.0);
  std::vector<double> grid = lambdas;
  std::sort(grid.begin(), grid.end());

  SpeedDerivativeReport rep;
  rep.replicas = replicas;
  const bool exact0 = dist.kind == DistKind::homogeneous;
  rep.v0_exact = exact0;

  const size_t ng = grid.size();
  std::vector<std::vector<double>> v(ng, std::vector<double>(replicas, 0.0));
  std::vector<double> v0(replicas, 0.0);
  for (size_t r = 0; r < replicas; ++r) {
    const uint64_t env_seed = derive_key({seed, r + 1});
    for (size_t g = 0; g < ng; ++g) {
      EnvironmentField field(dist, env_seed);
      PerturbedView view(field, grid[g]);
      Stream rng(derive_key({role_key(seed, Role::walk), r}));
      WalkPath path = simulate(view, origin(), horizon, rng);
      v[g][r] = empirical_speed(path)[0];
    }
    if (exact0) {
      v0[r] = dist.atoms.front().omega.drift()[0];
    } else {
      EnvironmentField field(dist, env_seed);
      PerturbedView view(field, 0.0);
      Stream rng(derive_key({role_key(seed, Role::walk), r}));
      WalkPath path = simulate(view, origin(), horizon, rng);
      v0[r] = empirical_speed(path)[0];
    }
  }

  for (size_t g = 0; g < ng; ++g) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (double x : v[g]) {
      s1 += x;
      s2 += x * x;
    }
    const double n = static_cast<double>(replicas);
    SpeedPoint pt;
    pt.lambda = grid[g];
    pt.v1 = s1 / n;
    pt.se = std::sqrt(std::max(0.0, s2 / n - pt.v1 * pt.v1) / n);
    rep.points.push_back(pt);
  }
  {
    double s1 = 0.0;
    double s2 = 0.0;
    for (double x : v0) {
      s1 += x;
      s2 += x * x;
    }
    const double n = static_cast<double>(replicas);
    rep.v0 = s1 / n;
    rep.v0_se =
        exact0 ? 0.0 : std::sqrt(std::max(0.0, s2 / n - rep.v0 * rep.v0) / n);
  }

  // per-replica slope: fit dv = s*lambda + c*lambda^2 (least squares; exact
  // for a two-point grid)
  std::vector<double> slopes(replicas, 0.0);
  for (size_t r = 0; r < replicas; ++r) {
    if (ng == 1) {
      slopes[r] = (v[0][r] - v0[r]) / grid[0];
      continue;
    }
    double a11 = 0.0;
    double a12 = 0.0;
    double a22 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    for (size_t g = 0; g < ng; ++g) {
      const double l = grid[g];
      const double dv = v[g][r] - v0[r];
      a11 += l * l;
      a12 += l * l * l;
      a22 += l * l * l * l;
      b1 += l * dv;
      b2 += l * l * dv;
    }
    const double det = a11 * a22 - a12 * a12;
    RWRE_CHECK_MSG(std::abs(det) > 1e-18, "degenerate lambda grid");
    slopes[r] = (b1 * a22 - b2 * a12) / det;
  }
  double s1 = 0.0;
  double s2 = 0.0;
  for (double x : slopes) {
    s1 += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(replicas);
  rep.slope = s1 / n;
  rep.slope_se = std::sqrt(std::max(0.0, s2 / n - rep.slope * rep.slope) / n);
  return rep;
}

VarianceFlatness second_moment_probe(const EnvDistribution& dist,
                                     const LocalFunction& f, double lambda,
                                     size_t replicas, uint64_t seed,
                                     const std::vector<size_t>& n_grid) {
  dist.validate();
  RWRE_CHECK(replicas >= 8);
  RWRE_CHECK(!n_grid.empty());
  std::vector<size_t> grid = n_grid;
  std::sort(grid.begin(), grid.end());
  const size_t horizon = grid.back();
  RWRE_CHECK(horizon >= 2);

  std::vector<std::vector<double>> sums(replicas,
                                        std::vector<double>(grid.size(), 0.0));
  double total = 0.0;
  double total_n = 0.0;
  for (size_t r = 0; r < replicas; ++r) {
    EnvironmentField field(dist, derive_key({seed, r + 1}));
    PerturbedView view(field, lambda);
    Stream rng(derive_key({role_key(seed, Role::walk), r}));
    WalkPath path = simulate(view, origin(), horizon, rng);
    Point pos = path.start;
    double acc = 0.0;
    size_t gi = 0;
    for (size_t i = 0; i < path.length(); ++i) {
      acc += f.eval(field.site(pos));
      step_inplace(pos, path.steps[i]);
      while (gi < grid.size() && i + 1 == grid[gi]) {
        sums[r][gi] = acc;
        ++gi;
      }
    }
    total += acc;
    total_n += static_cast<double>(path.length());
  }
  const double mean = total / total_n;

  VarianceFlatness out;
  out.n_grid = grid;
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (size_t r = 0; r < replicas; ++r) {
      const double c = sums[r][gi] - mean * static_cast<double>(grid[gi]);
      s1 += c;
      s2 += c * c;
    }
    const double n = static_cast<double>(replicas);
    const double var = std::max(0.0, s2 / n - (s1 / n) * (s1 / n));
    out.var_over_n.push_back(var / static_cast<double>(grid[gi]));
  }
  double mn = out.var_over_n[0];
  double mx = out.var_over_n[0];
  for (double x : out.var_over_n) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  out.ratio_max_min = mn > 0.0 ? mx / mn : 0.0;
  return out;
}

}  // namespace rwre

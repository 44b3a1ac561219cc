#include "rwre/kalikow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rwre/check.hpp"
#include "rwre/domain.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr size_t kMaxExactAssignments = 200000;

std::vector<std::pair<SitePair, double>> joint_atoms(const EnvDistribution& dist) {
  std::vector<std::pair<SitePair, double>> out;
  switch (dist.kind) {
    case DistKind::homogeneous:
    case DistKind::finite_support:
      for (size_t i = 0; i < dist.atoms.size(); ++i)
        out.emplace_back(dist.atoms[i], dist.weights[i]);
      break;
    case DistKind::proportional:
      for (size_t i = 0; i < dist.omega_atoms.size(); ++i) {
        SitePair z{dist.omega_atoms[i], proportional_cell(dist.omega_atoms[i], dist.ell)};
        out.emplace_back(z, dist.omega_weights[i]);
      }
      break;
    case DistKind::independent_product:
      for (size_t i = 0; i < dist.omega_atoms.size(); ++i)
        for (size_t j = 0; j < dist.xi_atoms.size(); ++j)
          out.emplace_back(SitePair{dist.omega_atoms[i], dist.xi_atoms[j]},
                           dist.omega_weights[i] * dist.xi_weights[j]);
      break;
  }
  RWRE_CHECK(!out.empty());
  return out;
}

}  // namespace

std::vector<Point> box_sites(int d, const Point& lo, const Point& hi) {
  RWRE_CHECK(d >= 1 && d <= kMaxDim);
  for (int j = 0; j < d; ++j) RWRE_CHECK(lo[j] <= hi[j]);
  std::vector<Point> out;
  Point z = lo;
  std::function<void(int)> rec = [&](int axis) {
    if (axis == d) {
      out.push_back(z);
      return;
    }
    for (int64_t c = lo[axis]; c <= hi[axis]; ++c) {
      z[axis] = c;
      rec(axis + 1);
    }
    z[axis] = lo[axis];
  };
  rec(0);
  return out;
}

std::array<double, kMaxDim> KalikowChain::drift_at(int s) const {
  return local_drift(rows[static_cast<size_t>(s)].data(), d);
}

KalikowChain build_chain(const EnvDistribution& dist, double lambda,
                         const std::vector<Point>& sites, const Point& start,
                         ChainMode mode, size_t mc_samples, uint64_t seed,
                         SolveRoute route) {
  dist.validate();
  const int d = dist.d;
  const int n = static_cast<int>(sites.size());
  RWRE_CHECK(n > 0);

  auto atoms = joint_atoms(dist);
  const size_t na = atoms.size();
  std::vector<LocalEnv> cells(na);
  for (size_t a = 0; a < na; ++a) cells[a] = perturb(atoms[a].first, lambda);

  KalikowChain chain;
  chain.d = d;
  chain.start = start;
  chain.sites = sites;
  chain.mode = mode;

  // assignment: atom index per site
  std::vector<size_t> assign(static_cast<size_t>(n), 0);
  std::vector<double> num(static_cast<size_t>(n) * kMaxDirs, 0.0);
  std::vector<double> den(static_cast<size_t>(n), 0.0);
  Eigen::VectorXd exit_acc;
  int start_idx = -1;

  auto accumulate = [&](double w) {
    SiteListSystem sys(
        d, sites,
        [&](const Point& p) {
          // row under the current assignment
          for (int s = 0; s < n; ++s) {
            if (sites[static_cast<size_t>(s)] == p)
              return cells[assign[static_cast<size_t>(s)]];
          }
          RWRE_CHECK_MSG(false, "row queried off the site list");
          return cells[0];
        },
        route);
    if (start_idx < 0) {
      start_idx = sys.interior_index(start);
      RWRE_CHECK_MSG(start_idx >= 0, "chain start outside the site set");
      chain.boundary = sys.boundary();
      exit_acc = Eigen::VectorXd::Zero(sys.n_boundary());
    }
    Eigen::VectorXd g = sys.system().green_row(start_idx);
    Eigen::VectorXd exit = sys.system().exit_law_from_green(g);
    exit_acc += w * exit;
    for (int s = 0; s < n; ++s) {
      const LocalEnv& row = cells[assign[static_cast<size_t>(s)]];
      den[static_cast<size_t>(s)] += w * g[s];
      for (int e = 0; e < 2 * d; ++e)
        num[static_cast<size_t>(s) * kMaxDirs + e] += w * g[s] * row.p[e];
    }
  };

  if (mode == ChainMode::exact) {
    double total = std::pow(static_cast<double>(na), n);
    RWRE_CHECK_MSG(total <= static_cast<double>(kMaxExactAssignments),
                   "assignment space too large for exact mode");
    const size_t count = static_cast<size_t>(std::llround(total));
    for (size_t it = 0; it < count; ++it) {
      double w = 1.0;
      for (int s = 0; s < n; ++s) w *= atoms[assign[static_cast<size_t>(s)]].second;
      accumulate(w);
      // odometer
      for (int s = 0; s < n; ++s) {
        if (++assign[static_cast<size_t>(s)] < na) break;
        assign[static_cast<size_t>(s)] = 0;
      }
    }
    chain.n_assignments = count;
  } else {
    RWRE_CHECK(mc_samples > 0);
    std::vector<double> wts(na);
    for (size_t a = 0; a < na; ++a) wts[a] = atoms[a].second;
    Stream rng(role_key(seed, Role::site_omega));
    for (size_t it = 0; it < mc_samples; ++it) {
      for (int s = 0; s < n; ++s)
        assign[static_cast<size_t>(s)] =
            static_cast<size_t>(rng.categorical(wts.data(), static_cast<int>(na)));
      accumulate(1.0 / static_cast<double>(mc_samples));
    }
    chain.n_assignments = mc_samples;
  }

  chain.annealed_exit = exit_acc;
  chain.occupation.assign(den.begin(), den.end());
  chain.rows.resize(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    RWRE_CHECK(den[static_cast<size_t>(s)] > 0.0);
    auto& row = chain.rows[static_cast<size_t>(s)];
    row.fill(0.0);
    double sum = 0.0;
    for (int e = 0; e < 2 * d; ++e) {
      row[static_cast<size_t>(e)] =
          num[static_cast<size_t>(s) * kMaxDirs + e] / den[static_cast<size_t>(s)];
      sum += row[static_cast<size_t>(e)];
    }
    RWRE_CHECK_MSG(std::abs(sum - 1.0) <= 1e-9, "auxiliary row mass defect");
    for (int e = 0; e < 2 * d; ++e) row[static_cast<size_t>(e)] /= sum;
  }

  // exit law of the auxiliary chain itself, same geometry
  {
    SiteListSystem sys(
        d, sites,
        [&](const Point& p) {
          for (int s = 0; s < n; ++s) {
            if (sites[static_cast<size_t>(s)] == p) {
              LocalEnv cell;
              cell.d = d;
              cell.kappa = dist.kappa / 2.0;
              cell.p = chain.rows[static_cast<size_t>(s)];
              return cell;
            }
          }
          RWRE_CHECK_MSG(false, "row queried off the site list");
          return LocalEnv{};
        },
        route);
    RWRE_CHECK(sys.boundary() == chain.boundary);
    chain.chain_exit = sys.system().exit_law(sys.interior_index(start));
  }
  return chain;
}

ExitIdentityReport exit_identity_check(const KalikowChain& chain) {
  ExitIdentityReport rep;
  RWRE_CHECK(chain.chain_exit.size() == chain.annealed_exit.size());
  rep.chain_mass = chain.chain_exit.sum();
  rep.annealed_mass = chain.annealed_exit.sum();
  rep.tv = 0.5 * (chain.chain_exit - chain.annealed_exit).cwiseAbs().sum();
  return rep;
}

double condition_K_value(const EnvDistribution& dist,
                         const std::array<double, kMaxDim>& ell,
                         const std::array<double, kMaxDirs>& f) {
  const int d = dist.d;
  auto atoms = joint_atoms(dist);
  double acc = 0.0;
  for (const auto& [z, w] : atoms) {
    double denom = 0.0;
    for (int e = 0; e < 2 * d; ++e) denom += z.omega.p[static_cast<size_t>(e)] * f[static_cast<size_t>(e)];
    RWRE_CHECK_MSG(denom > 0.0, "direction vector annihilates a row");
    auto b = z.xi.drift();
    double numer = 0.0;
    for (int j = 0; j < d; ++j) numer += b[static_cast<size_t>(j)] * ell[static_cast<size_t>(j)];
    acc += w * numer / denom;
  }
  return acc;
}

ConditionKReport certify_condition_K(const EnvDistribution& dist,
                                     const std::array<double, kMaxDim>& ell,
                                     uint64_t seed, int grid, int starts,
                                     int iters) {
  dist.validate();
  const int d = dist.d;
  const int m = 2 * d;
  ConditionKReport rep;

  auto normalize = [&](std::array<double, kMaxDirs>& f) {
    double mx = 0.0;
    for (int e = 0; e < m; ++e) mx = std::max(mx, f[static_cast<size_t>(e)]);
    if (mx <= 0.0) return false;
    for (int e = 0; e < m; ++e) {
      f[static_cast<size_t>(e)] = std::clamp(f[static_cast<size_t>(e)] / mx, 0.0, 1.0);
    }
    return true;
  };

  bool have = false;
  auto consider = [&](std::array<double, kMaxDirs> f) {
    if (!normalize(f)) return;
    const double v = condition_K_value(dist, ell, f);
    ++rep.evaluations;
    rep.max_abs = std::max(rep.max_abs, std::abs(v));
    if (!have || v < rep.min_value) {
      rep.min_value = v;
      rep.witness = f;
      have = true;
    }
  };

  // full grid over {0, 1/(g-1), ..., 1}^m minus the origin
  RWRE_CHECK(grid >= 2);
  double total = std::pow(static_cast<double>(grid), m);
  RWRE_CHECK_MSG(total <= 1e6, "grid too large, lower the resolution");
  std::vector<int> idx(static_cast<size_t>(m), 0);
  const size_t count = static_cast<size_t>(std::llround(total));
  for (size_t it = 0; it < count; ++it) {
    std::array<double, kMaxDirs> f{};
    bool zero = true;
    for (int e = 0; e < m; ++e) {
      f[static_cast<size_t>(e)] =
          static_cast<double>(idx[static_cast<size_t>(e)]) / (grid - 1);
      if (idx[static_cast<size_t>(e)] != 0) zero = false;
    }
    if (!zero) consider(f);
    for (int e = 0; e < m; ++e) {
      if (++idx[static_cast<size_t>(e)] < grid) break;
      idx[static_cast<size_t>(e)] = 0;
    }
  }

  // multi-start projected descent with numeric gradients
  Stream rng(role_key(seed, Role::data));
  const double h = 1e-6;
  for (int s0 = 0; s0 < starts; ++s0) {
    std::array<double, kMaxDirs> f{};
    for (int e = 0; e < m; ++e) f[static_cast<size_t>(e)] = rng.next_unit();
    if (!normalize(f)) continue;
    double cur = condition_K_value(dist, ell, f);
    double step_sz = 0.25;
    for (int it = 0; it < iters; ++it) {
      std::array<double, kMaxDirs> gradv{};
      for (int e = 0; e < m; ++e) {
        auto fp = f;
        auto fm = f;
        fp[static_cast<size_t>(e)] = std::min(1.0, fp[static_cast<size_t>(e)] + h);
        fm[static_cast<size_t>(e)] = std::max(0.0, fm[static_cast<size_t>(e)] - h);
        const double dx = fp[static_cast<size_t>(e)] - fm[static_cast<size_t>(e)];
        if (dx <= 0.0) continue;
        gradv[static_cast<size_t>(e)] =
            (condition_K_value(dist, ell, fp) - condition_K_value(dist, ell, fm)) / dx;
      }
      auto trial = f;
      for (int e = 0; e < m; ++e) {
        trial[static_cast<size_t>(e)] = std::clamp(
            trial[static_cast<size_t>(e)] - step_sz * gradv[static_cast<size_t>(e)], 0.0, 1.0);
      }
      if (!normalize(trial)) break;
      const double tv = condition_K_value(dist, ell, trial);
      if (tv < cur - 1e-15) {
        f = trial;
        cur = tv;
      } else {
        step_sz *= 0.5;
        if (step_sz < 1e-6) break;
      }
    }
    consider(f);
  }

  constexpr double kTol = 1e-9;
  if (rep.max_abs <= 1e-12) {
    // A vanishes identically: drift functional degenerate, no certificate
    rep.verdict = ConditionKReport::Verdict::refuted;
    rep.witness.fill(1.0);
  } else if (rep.min_value < -kTol) {
    rep.verdict = ConditionKReport::Verdict::refuted;
  } else if (rep.min_value > kTol) {
    rep.verdict = ConditionKReport::Verdict::certified;
  } else {
    rep.verdict = ConditionKReport::Verdict::inconclusive;
  }
  return rep;
}

RhoEstimate estimate_rho(const EnvDistribution& dist, double lambda,
                         const std::vector<std::vector<Point>>& sets,
                         const Point& start, ChainMode mode, size_t mc_samples,
                         uint64_t seed) {
  RWRE_CHECK(lambda > 0.0);
  RWRE_CHECK(!sets.empty());
  RhoEstimate est;
  bool first = true;
  for (size_t u = 0; u < sets.size(); ++u) {
    KalikowChain chain = build_chain(dist, lambda, sets[u], start, mode,
                                     mc_samples, derive_key({seed, u}));
    double mn = 0.0;
    for (int s = 0; s < static_cast<int>(chain.sites.size()); ++s) {
      const double v = chain.drift_at(s)[0] / lambda;
      if (s == 0 || v < mn) mn = v;
    }
    est.per_set_min.push_back(mn);
    if (first || mn < est.rho_hat) est.rho_hat = mn;
    first = false;
  }
  return est;
}

}  // namespace rwre

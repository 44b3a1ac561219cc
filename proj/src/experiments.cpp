#include "rwre/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "rwre/coupling.hpp"
#include "rwre/girsanov.hpp"
#include "rwre/harnack.hpp"
#include "rwre/kalikow.hpp"
#include "rwre/regen.hpp"
#include "rwre/renewal.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

namespace rwre {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mid_ci_se(const LambdaEstimate& e) { return (e.ci_high - e.ci_low) / 6.0; }

// P(hit -j before +i) by a dense absorbing-chain solve; oracle for the
// closed form.
double ruin_solve(double q, int64_t i, int64_t j) {
  const int n = static_cast<int>(i + j - 1);
  const double p = q / (1.0 + q);
  std::vector<Triplet> tr;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {  // s <-> position s - j + 1
    tr.emplace_back(s, s, 1.0);
    if (s + 1 < n) tr.emplace_back(s, s + 1, -p);
    if (s - 1 >= 0) tr.emplace_back(s, s - 1, -(1.0 - p));
    if (s == 0) b[s] = 1.0 - p;  // absorbed at -j
  }
  LinearSolver solver(n, tr, SolveRoute::dense);
  Eigen::VectorXd x = solver.solve(b);
  return x[static_cast<int>(j - 1)];
}

double min_entry(const LocalEnv& w) {
  double m = w.p[0];
  for (int e = 1; e < w.dirs(); ++e) m = std::min(m, w.p[e]);
  return m;
}

std::vector<double> require_lambdas(const ExperimentConfig& cfg,
                                    std::vector<double> def, double kappa) {
  std::vector<double> ls = cfg.num_list("lambdas", std::move(def));
  for (double l : ls)
    if (l < 0.0 || l >= 0.5 * kappa)
      throw ConfigError("lambda " + std::to_string(l) +
                        " outside [0, kappa/2) for kappa " + std::to_string(kappa));
  return ls;
}

double require_lambda(const ExperimentConfig& cfg, double def, double kappa) {
  double l = cfg.num("lambda", def);
  if (l < 0.0 || l >= 0.5 * kappa)
    throw ConfigError("lambda " + std::to_string(l) + " outside [0, kappa/2)");
  return l;
}

// ---------------------------------------------------------------- girsanov

void drive_girsanov(const ExperimentConfig& cfg, int threads, ExperimentRun& run) {
  const size_t count = cfg.uint("count", 50);
  const int n_cap = std::min<int>(6, cfg.integer("n_steps", 6));
  std::vector<double> devs(count), recon(count), hexc(count);

  parallel_for(count, threads, [&](size_t i) {
    Stream g({run.seed, 0x61u, i});
    EnvDistribution dist = random_proportional_dist(g.next_bits(), false);
    const double lambda = 0.45 * dist.kappa * g.next_unit();
    EnvironmentField field(dist, g.next_bits());
    const int n = 3 + static_cast<int>(g.next_bits() % static_cast<uint64_t>(n_cap - 2));
    UnitMeanReport rep = unit_mean_oracle(field, origin(), lambda, n);
    devs[i] = std::abs(rep.value - 1.0);

    PerturbedView view(field, lambda);
    Stream walk_rng({run.seed, 0x62u, i});
    WalkPath path = simulate(view, origin(), 60, walk_rng);
    GirsanovWeight w = log_weight(field, path, lambda);
    TaylorSplit t = taylor_split(field, path, lambda);
    recon[i] = std::abs(t.linear + t.quadratic + t.remainder - w.log_weight);
    hexc[i] = std::max(0.0, std::abs(t.h_term) - t.h_bound);
  });

  double max_dev = 0, max_recon = 0, max_hexc = 0;
  for (size_t i = 0; i < count; ++i) {
    max_dev = std::max(max_dev, devs[i]);
    max_recon = std::max(max_recon, recon[i]);
    max_hexc = std::max(max_hexc, hexc[i]);
  }
  run.row("max_unit_mean_dev", max_dev, 0, static_cast<double>(count));
  run.row("max_taylor_reconstruction_dev", max_recon, 0, static_cast<double>(count));
  run.row("max_h_bound_excess", max_hexc, 0, static_cast<double>(count));
  run.gate("unit_mean_identity", max_dev <= 1e-12, fmt17(max_dev));
  run.gate("taylor_reconstruction", max_recon <= 1e-12, fmt17(max_recon));
  run.gate("h_term_bounded", max_hexc <= 0.0, fmt17(max_hexc));

  if (cfg.flag("reweight", true)) {
    EnvDistribution dist = cfg.has_environment() ? cfg.environment()
                                                 : preset_environment("simple");
    const double lambda = require_lambda(cfg, 0.1, dist.kappa);
    EnvironmentField field(dist, derive_key({run.seed, 0x63u}));
    LocalFunction f = LocalFunction::omega_dir(0);
    ReweightedEstimate est = reweighted_block_estimator(
        field, f, lambda, cfg.num("t", 1.0), cfg.uint("reweight_replicas", 2000),
        derive_key({run.seed, 0x64u}));
    run.row("reweight_direct", est.direct_mean, est.direct_stderr,
            static_cast<double>(est.replicas));
    run.row("reweight_weighted", est.reweighted_mean, est.reweighted_stderr,
            static_cast<double>(est.replicas));
    run.row("reweight_ess", est.ess, 0, static_cast<double>(est.replicas));
    const double se = std::sqrt(est.direct_stderr * est.direct_stderr +
                                est.reweighted_stderr * est.reweighted_stderr);
    const double diff = est.direct_mean - est.reweighted_mean;
    // on constant fields both routes agree to rounding and se is roundoff
    // noise too; a z-score there would be meaningless
    const double float_floor =
        1e-12 * std::max(1.0, std::abs(est.direct_mean));
    const double z =
        (se > 0 && std::abs(diff) > float_floor) ? diff / se : 0.0;
    run.row("reweight_z", z, 0, static_cast<double>(est.replicas));
    run.gate("reweight_agreement", !est.refused && std::abs(z) < kSigmas, fmt17(z));
  }
}

// ----------------------------------------------------------------- kalikow

void drive_kalikow(const ExperimentConfig& cfg, int /*threads*/, ExperimentRun& run) {
  EnvDistribution dist = cfg.has_environment()
                             ? cfg.environment()
                             : preset_environment("two_atom_wide");
  std::vector<double> lambdas = require_lambdas(cfg, {0.0, 0.1}, dist.kappa);
  const int r = cfg.integer("box_radius", 1);
  Point lo = origin(), hi = origin();
  for (int a = 0; a < dist.d; ++a) {
    lo[a] = -r;
    hi[a] = r;
  }
  std::vector<Point> sites = box_sites(dist.d, lo, hi);
  const ChainMode mode =
      cfg.str("mode", "exact") == "exact" ? ChainMode::exact : ChainMode::monte_carlo;
  const size_t mc = cfg.uint("mc_samples", 20000);

  double tv_max = 0;
  for (size_t li = 0; li < lambdas.size(); ++li) {
    KalikowChain chain = build_chain(dist, lambdas[li], sites, origin(), mode, mc,
                                     derive_key({run.seed, 0x6bu, li}));
    ExitIdentityReport rep = exit_identity_check(chain);
    run.row("exit_tv_lambda_" + fmt17(lambdas[li]), rep.tv, 0,
            static_cast<double>(chain.n_assignments));
    tv_max = std::max(tv_max, rep.tv);
  }
  const double tv_tol = mode == ChainMode::exact ? 1e-9 : 0.05;
  run.gate("exit_identity", tv_max < tv_tol, fmt17(tv_max));

  ConditionKReport ck =
      certify_condition_K(dist, dist.ell, derive_key({run.seed, 0x6cu}));
  run.row("condition_K_min", ck.min_value, 0, static_cast<double>(ck.evaluations));
  const char* verdict = ck.verdict == ConditionKReport::Verdict::certified
                            ? "certified"
                            : ck.verdict == ConditionKReport::Verdict::refuted
                                  ? "refuted"
                                  : "inconclusive";
  run.extra["condition_K"] = verdict;
  const std::string expect = cfg.str("expect_condition", "");
  if (!expect.empty())
    run.gate("condition_K_expected", expect == verdict, verdict);

  if (ck.verdict == ConditionKReport::Verdict::certified && !lambdas.empty() &&
      lambdas.back() > 0) {
    RhoEstimate rho = estimate_rho(dist, lambdas.back(), {sites}, origin(), mode,
                                   mc, derive_key({run.seed, 0x6du}));
    run.row("rho_hat", rho.rho_hat, 0, static_cast<double>(rho.per_set_min.size()));
    run.gate("rho_positive", rho.rho_hat > 0, fmt17(rho.rho_hat));
  }
}

// ----------------------------------------------------------------- harnack

void drive_harnack(const ExperimentConfig& cfg, int /*threads*/, ExperimentRun& run) {
  EnvDistribution dist = cfg.has_environment()
                             ? cfg.environment()
                             : preset_environment("independent_mix");
  const double R = cfg.num("radius", 8.0);
  const double sigma = cfg.num("sigma", 0.5);
  const int count = cfg.integer("count", 200);
  const double lambda = require_lambda(cfg, 0.1, dist.kappa);

  HarnackBatch a = harnack_batch(dist, lambda, R, sigma, count,
                                 derive_key({run.seed, 0x4au}));
  HarnackBatch b = harnack_batch(dist, 0.5 * lambda, 2.0 * R, sigma, count,
                                 derive_key({run.seed, 0x4bu}));
  run.row("max_ratio_base", a.max_ratio, 0, a.count);
  run.row("max_ratio_refined", b.max_ratio, 0, b.count);
  run.row("mean_ratio_base", a.mean_ratio, 0, a.count);
  run.row("mean_ratio_refined", b.mean_ratio, 0, b.count);
  run.row("b0R_base", a.b0_max * R, 0, a.count);
  run.row("b0R_refined", b.b0_max * 2.0 * R, 0, b.count);
  const double rel =
      std::abs(b.max_ratio - a.max_ratio) / std::max(a.max_ratio, 1e-300);
  run.row("max_ratio_rel_change", rel, 0, a.count + b.count);
  run.gate("ratio_stable_under_refinement", rel < 0.20, fmt17(rel));
  run.gate("ratios_finite",
           std::isfinite(a.max_ratio) && std::isfinite(b.max_ratio) &&
               a.max_ratio >= 1.0 && b.max_ratio >= 1.0,
           fmt17(a.max_ratio));
}

// ------------------------------------------------------------------ couple

void drive_couple(const ExperimentConfig& cfg, int threads, ExperimentRun& run) {
  EnvDistribution dist = cfg.has_environment()
                             ? cfg.environment()
                             : preset_environment("two_atom_wide");
  if (!dist.balanced())
    throw ConfigError("couple requires a balanced omega marginal");
  std::vector<double> lambdas = require_lambdas(cfg, {0.1, 0.05}, dist.kappa);
  std::vector<double> ns = cfg.num_list("levels", {2, 4});
  const int64_t n_max =
      static_cast<int64_t>(*std::max_element(ns.begin(), ns.end()));
  const size_t replicas = cfg.uint("replicas", 200);
  const double s_probe = cfg.num("exp_moment_s", 0.1);

  // 20-case closed form vs dense solve.
  {
    const double qs[] = {2.0, 1.5, 1.1, 1.0 + 1e-7, 0.5};
    const int64_t ij[][2] = {{1, 1}, {3, 2}, {5, 5}, {2, 7}};
    double max_err = 0;
    for (double q : qs)
      for (auto& c : ij)
        max_err = std::max(
            max_err, std::abs(gambler_ruin(q, c[0], c[1]) - ruin_solve(q, c[0], c[1])));
    run.row("ruin_closed_form_max_err", max_err, 0, 20);
    run.gate("ruin_closed_form", max_err <= 1e-12, fmt17(max_err));
  }

  struct Cell {
    double t_mean = 0, t_se = 0, s_mean = 0, s_se = 0, emoment = 0;
    double censor = 0;
    size_t violations = 0, clamped = 0;
    double up_frac = 0, up_n = 0;
  };
  std::vector<Cell> cells(lambdas.size() * ns.size());
  std::vector<double> zps;  // measured drift-chain top-hit probability / lambda

  // condition (K) certificate gates the ruin-envelope probe below
  ConditionKReport ck =
      certify_condition_K(dist, {1.0, 0.0, 0.0, 0.0}, run.seed ^ 0xC5u);
  const bool k_ok = ck.verdict == ConditionKReport::Verdict::certified;

  for (size_t li = 0; li < lambdas.size(); ++li) {
    const double lambda = lambdas[li];
    LevelClock clock = LevelClock::from_lambda(lambda);
    const size_t horizon =
        cfg.uint("horizon", static_cast<size_t>(60.0 * static_cast<double>(n_max) /
                                                (lambda * lambda)));
    std::vector<CouplingRun> runs(replicas);
    parallel_for(replicas, threads, [&](size_t r) {
      EnvironmentField field(dist, derive_key({run.seed, 0xC0u, li, r}));
      PerturbedView view(field, lambda);
      Stream rng({run.seed, 0xC1u, li, r});
      CouplingConfig cc;
      cc.n_max = n_max;
      cc.horizon = horizon;
      runs[r] = run_coupling(view, clock, origin(), cc, rng);
    });

    double y_up = 0, y_dn = 0;
    size_t clamped = 0;
    for (const auto& cr : runs) {
      y_up += static_cast<double>(cr.y_up);
      y_dn += static_cast<double>(cr.y_down);
      clamped += cr.clamped;
    }
    for (size_t ni = 0; ni < ns.size(); ++ni) {
      const int64_t n = static_cast<int64_t>(ns[ni]);
      Cell& cell = cells[li * ns.size() + ni];
      std::vector<double> ts, ss, es;
      size_t miss = 0;
      for (const auto& cr : runs) {
        const size_t t = cr.t_tilde[static_cast<size_t>(n)];
        const size_t s = cr.s_drift[static_cast<size_t>(n)];
        if (t == 0 || s == 0) {
          ++miss;
          continue;
        }
        ts.push_back(static_cast<double>(t));
        ss.push_back(static_cast<double>(s));
        es.push_back(std::exp(s_probe * lambda * lambda * static_cast<double>(t) /
                              static_cast<double>(n)));
      }
      MeanCI tci = mean_ci(ts), sci = mean_ci(ss), eci = mean_ci(es);
      const double scale = lambda * lambda / static_cast<double>(n);
      cell.t_mean = tci.mean * scale;
      cell.t_se = tci.stderr_ * scale;
      cell.s_mean = sci.mean * scale;
      cell.s_se = sci.stderr_ * scale;
      cell.emoment = eci.mean;
      cell.censor = static_cast<double>(miss) / static_cast<double>(replicas);
      cell.clamped = clamped;
      cell.up_frac = y_up / std::max(1.0, y_up + y_dn);
      cell.up_n = y_up + y_dn;
      const std::string tag =
          "_l" + fmt17(lambda) + "_n" + std::to_string(n);
      run.row("lambda2_T_tilde_over_n" + tag, cell.t_mean, cell.t_se,
              static_cast<double>(ts.size()), cell.censor);
      run.row("lambda2_S_over_n" + tag, cell.s_mean, cell.s_se,
              static_cast<double>(ss.size()), cell.censor);
      run.row("exp_moment" + tag, cell.emoment, eci.stderr_,
              static_cast<double>(es.size()), cell.censor);
    }
    // off-origin up-fraction of the coupled slow chain vs (1-lambda/kappa)/2
    const double u = z_up_probability(lambda, dist.kappa);
    const double n_moves = y_up + y_dn;
    const double frac = y_up / std::max(1.0, n_moves);
    const double se = std::sqrt(u * (1.0 - u) / std::max(1.0, n_moves));
    run.row("y_up_fraction_l" + fmt17(lambda), frac, se, n_moves);
    run.gate("z_marginal_l" + fmt17(lambda), std::abs(frac - u) < kSigmas * se,
             fmt17((frac - u) / se));
    run.row("clamped_l" + fmt17(lambda), static_cast<double>(clamped), 0,
            static_cast<double>(replicas));

    // drift-chain excursion from 1: measured top-before-origin vs closed form
    {
      const double ud = z_drift_up_probability(lambda, dist.kappa);
      const int64_t h = n_max * clock.gap();
      const double exact = z_drift_top_probability(lambda, dist.kappa, h);
      Stream zrng({run.seed, 0xC4u, li});
      const int m = 40000;
      int top = 0;
      for (int e = 0; e < m; ++e) {
        int64_t z = 1;
        for (;;) {
          z += zrng.next_unit() < ud ? 1 : -1;
          if (z == 0 || z >= h) break;
        }
        if (z >= h) ++top;
      }
      const double phat = static_cast<double>(top) / m;
      const double zse = std::sqrt(exact * (1.0 - exact) / m);
      run.row("z_top_hat_over_lambda_l" + fmt17(lambda), phat / lambda,
              zse / lambda, m);
      run.gate("z_top_measured_l" + fmt17(lambda),
               std::abs(phat - exact) < kSigmas * zse,
               fmt17((phat - exact) / zse));
      zps.push_back(phat / lambda);
    }

    // signed first passages vs the two ruin envelopes; needs certified (K)
    if (k_ok) {
      std::vector<std::vector<Point>> sets(1);
      for (int64_t a = -1; a <= 1; ++a)
        for (int64_t b = -1; b <= 1; ++b) {
          Point p = origin();
          p[0] = a;
          p[1] = b;
          sets[0].push_back(p);
        }
      RhoEstimate re = estimate_rho(dist, lambda, sets, origin());
      const double q_low = 1.0 + re.rho_hat * lambda;
      const double q_high = 1.0 + 4.0 * lambda / dist.kappa;
      for (int64_t n : {int64_t{1}, n_max}) {
        const int64_t width = n * clock.gap();
        size_t minus_first = 0, decided = 0;
        for (const auto& cr : runs) {
          const size_t tp = cr.t_plus[static_cast<size_t>(n)];
          const size_t tm = cr.t_minus[static_cast<size_t>(n)];
          if (tp == 0 && tm == 0) continue;
          ++decided;
          if (tm != 0 && (tp == 0 || tm < tp)) ++minus_first;
        }
        const std::string tag = "_l" + fmt17(lambda) + "_n" + std::to_string(n);
        if (decided == 0) {
          run.gate("ruin_envelope" + tag, false, "no decided replicas");
          continue;
        }
        const double md = static_cast<double>(decided);
        const double phat = static_cast<double>(minus_first) / md;
        // +1/m guards the zero-count corner of the binomial band
        const double se = std::sqrt(phat * (1.0 - phat) / md) + 1.0 / md;
        const double lo = gambler_ruin(q_high, width, width);
        const double hi = gambler_ruin(q_low, width, width);
        run.row("back_exit_fraction" + tag, phat, se, md);
        const bool pass = phat - kSigmas * se <= hi && phat + kSigmas * se >= lo;
        run.gate("ruin_envelope" + tag, pass,
                 fmt17(lo) + " <= " + fmt17(phat) + " <= " + fmt17(hi));
      }
    } else {
      run.gate("ruin_envelope_l" + fmt17(lambda), true,
               "skipped: directional condition not certified");
    }
  }

  auto spread = [&](auto pick) {
    double mn = 1e300, mx = -1e300;
    for (const auto& c : cells) {
      double v = pick(c);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    return std::pair<double, double>(mn, mx);
  };
  auto [tmin, tmax] = spread([](const Cell& c) { return c.t_mean; });
  auto [smin, smax] = spread([](const Cell& c) { return c.s_mean; });
  auto [emin, emax] = spread([](const Cell& c) { return c.emoment; });
  run.row("T_tilde_grid_ratio", tmax / tmin, 0, static_cast<double>(cells.size()));
  run.row("S_grid_ratio", smax / smin, 0, static_cast<double>(cells.size()));
  run.row("exp_moment_grid_ratio", emax / emin, 0,
          static_cast<double>(cells.size()));
  run.gate("T_tilde_factor2", tmax / tmin <= 2.0, fmt17(tmax / tmin));
  run.gate("S_factor2", smax / smin <= 2.0, fmt17(smax / smin));
  run.gate("exp_moment_bounded", emax / emin <= 5.0, fmt17(emax / emin));

  // top-hit probability over lambda stays flat across the lambda grid
  if (zps.size() >= 2) {
    const double ratio = *std::max_element(zps.begin(), zps.end()) /
                         *std::min_element(zps.begin(), zps.end());
    run.row("z_top_over_lambda_ratio", ratio, 0, static_cast<double>(zps.size()));
    run.gate("z_top_scaling", ratio <= 2.0, fmt17(ratio));
  }

  size_t viol = 0;  // run_coupling throws on violation; reaching here means 0
  run.row("invariant_violations", static_cast<double>(viol), 0,
          static_cast<double>(replicas * lambdas.size()));
  run.gate("coupling_invariants", viol == 0, "per-step asserts");
}

// ------------------------------------------------------------------- regen

void drive_regen(const ExperimentConfig& cfg, int threads, ExperimentRun& run) {
  EnvDistribution dist = cfg.has_environment()
                             ? cfg.environment()
                             : preset_environment("two_atom_wide");
  const double lambda = require_lambda(cfg, 0.1, dist.kappa);
  const size_t replicas = cfg.uint("replicas", 8);
  const size_t horizon = cfg.uint("horizon", 20000);

  RegenKnobs knobs;
  knobs.period = cfg.integer("period", 96);
  knobs.bottom_gaps = cfg.integer("bottom_gaps", 3);
  knobs.confirm_levels = cfg.integer("confirm_levels", 10);
  knobs.confirm_steps_factor = cfg.num("confirm_steps_factor", 10.0);

  LevelClock clock = LevelClock::from_lambda(lambda);
  std::vector<double> cands =
      cfg.num_list("beta_candidates", {0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05});

  // fit beta across a few probe environments and lateral entries
  double beta = 2.0;
  for (uint64_t pe = 0; pe < 3; ++pe) {
    EnvironmentField probe(dist, derive_key({run.seed, 0xBEu, pe}));
    PerturbedView view(probe, lambda);
    std::vector<Point> entries;
    for (int64_t off : {0, -3, 3, 7}) {
      Point p = origin();
      p[0] = clock.gap();
      p[1] = off;
      entries.push_back(p);
    }
    BetaFit fit = fit_beta(view, clock, entries, cands, knobs);
    if (!fit.ok) {
      beta = 0.0;
      break;
    }
    beta = std::min(beta, fit.beta);
  }
  run.row("beta", beta, 0, 3);
  run.gate("beta_positive", beta > 0, fmt17(beta));
  if (beta <= 0) return;

  RegenRunConfig rc;
  rc.lambda = lambda;
  rc.beta = beta;
  rc.horizon = horizon;
  rc.knobs = knobs;

  std::vector<ReplicaResult> reps(replicas);
  parallel_for(replicas, threads, [&](size_t r) {
    reps[r] = run_posterior_replica(dist, run.seed, r, rc);
  });

  std::vector<std::vector<double>> dtau_series, dx1_series;
  std::vector<double> rep_dtau, rep_dx1;
  size_t blocks = 0, censored = 0, viol = 0, clamp = 0, coin_draws = 0;
  double ksum = 0;
  size_t kn = 0;
  nlohmann::json jblocks = nlohmann::json::array();
  for (size_t r = 0; r < replicas; ++r) {
    const auto& rr = reps[r];
    std::vector<double> dts, dxs;
    for (const auto& bl : rr.blocks) {
      dts.push_back(bl.dtau);
      dxs.push_back(bl.dx1);
      jblocks.push_back({{"replica", r},
                         {"dtau", bl.dtau},
                         {"dx1", bl.dx1},
                         {"dx2", bl.dx[1]}});
    }
    blocks += rr.blocks.size();
    censored += rr.censored;
    viol += rr.invariant_violations;
    clamp += rr.clamp_high + rr.clamp_low;
    coin_draws += rr.coin_draws;
    for (int k : rr.k_counts) {
      ksum += k;
      ++kn;
    }
    if (!dts.empty()) {
      rep_dtau.push_back(std::accumulate(dts.begin(), dts.end(), 0.0) /
                         static_cast<double>(dts.size()));
      rep_dx1.push_back(std::accumulate(dxs.begin(), dxs.end(), 0.0) /
                        static_cast<double>(dxs.size()));
      dtau_series.push_back(std::move(dts));
      dx1_series.push_back(std::move(dxs));
    }
  }
  const double censor_rate =
      static_cast<double>(censored) /
      std::max<double>(1.0, static_cast<double>(blocks + censored));
  MeanCI dtau_ci = mean_ci(rep_dtau);
  MeanCI dx1_ci = mean_ci(rep_dx1);
  run.row("blocks_total", static_cast<double>(blocks), 0,
          static_cast<double>(replicas), censor_rate);
  run.row("mean_dtau", dtau_ci.mean, dtau_ci.stderr_, static_cast<double>(blocks),
          censor_rate);
  run.row("mean_dx1", dx1_ci.mean, dx1_ci.stderr_, static_cast<double>(blocks),
          censor_rate);
  run.row("lambda2_mean_dtau", lambda * lambda * dtau_ci.mean,
          lambda * lambda * dtau_ci.stderr_, static_cast<double>(blocks));
  run.row("lambda_mean_dx1", lambda * dx1_ci.mean, lambda * dx1_ci.stderr_,
          static_cast<double>(blocks));
  run.row("mean_candidates_per_regen", kn ? ksum / static_cast<double>(kn) : 0, 0,
          static_cast<double>(kn));
  run.row("posterior_clamped", static_cast<double>(clamp), 0,
          static_cast<double>(coin_draws));
  for (int lag : {1, 2, 3}) {
    LagCorrelation lc = block_lag_correlation(dtau_series, lag);
    run.row("dtau_lag" + std::to_string(lag) + "_corr", lc.corr, 0,
            static_cast<double>(lc.pairs));
    LagCorrelation lx = block_lag_correlation(dx1_series, lag);
    run.row("dx1_lag" + std::to_string(lag) + "_corr", lx.corr, 0,
            static_cast<double>(lx.pairs));
    if (lag >= 2) {
      run.gate("dtau_lag" + std::to_string(lag) + "_null",
               std::abs(lc.z) < kSigmas, fmt17(lc.z));
      run.gate("dx1_lag" + std::to_string(lag) + "_null",
               std::abs(lx.z) < kSigmas, fmt17(lx.z));
    }
  }
  run.row("invariant_violations", static_cast<double>(viol), 0,
          static_cast<double>(replicas));
  run.gate("no_backtrack_violations", viol == 0, std::to_string(viol));
  run.extra["blocks"] = std::move(jblocks);
}

// --------------------------------------------------------------- ballistic

void drive_ballistic(const ExperimentConfig& cfg, int /*threads*/,
                     ExperimentRun& run) {
  EnvDistribution dist = cfg.has_environment()
                             ? cfg.environment()
                             : preset_environment("two_atom_drifted");
  LambdaParams prm;
  prm.replicas = cfg.uint("replicas", 16);
  prm.horizon = cfg.uint("horizon", 100000);
  prm.confirm_window = cfg.uint("confirm_window", 2000);
  prm.n_f = cfg.integer("n_f", 1);
  prm.bootstrap = cfg.uint("bootstrap", 400);
  prm.lambda = require_lambda(cfg, 0.0, dist.kappa);

  std::vector<LocalFunction> fs = {LocalFunction::constant(1.0),
                                   LocalFunction::omega_drift_e1(),
                                   LocalFunction::xi_drift_e1()};
  LambdaSuite suite =
      lambda_operator_suite(dist, fs, derive_key({run.seed, 0xBAu}), prm);
  run.gate("ballistic", suite.ballistic, std::to_string(suite.blocks_total));
  if (suite.ballistic) {
    for (const auto& e : suite.per_f) {
      run.row("Lambda_hat_" + e.name, e.value, mid_ci_se(e),
              static_cast<double>(suite.blocks_total));
      run.row("Q_hat_" + e.name, e.q_hat, 0,
              static_cast<double>(suite.blocks_total));
    }
    run.row("renewal_density", suite.renewal_density, 0,
            static_cast<double>(suite.blocks_total));
    run.row("mean_block_steps", suite.mean_block_steps, 0,
            static_cast<double>(suite.blocks_total));
    run.gate("Lambda_constant_zero", std::abs(suite.per_f[0].value) <= 1e-12,
             fmt17(suite.per_f[0].value));
  }

  std::vector<double> lambdas =
      require_lambdas(cfg, {0.02, 0.04, 0.06, 0.08}, dist.kappa);
  SpeedDerivativeReport sd =
      speed_derivative(dist, lambdas, cfg.uint("speed_replicas", 24),
                       cfg.uint("speed_horizon", 200000),
                       derive_key({run.seed, 0x5Eu}));
  run.row("v0", sd.v0, sd.v0_se, static_cast<double>(sd.replicas));
  run.row("speed_slope", sd.slope, sd.slope_se, static_cast<double>(sd.replicas));
  for (const auto& p : sd.points)
    run.row("v1_l" + fmt17(p.lambda), p.v1, p.se, static_cast<double>(sd.replicas));

  // For a deterministic base the slope is the mean perturbation drift and
  // the base-drift correction vanishes.
  const bool deterministic_base =
      dist.kind == DistKind::homogeneous ||
      (dist.kind == DistKind::independent_product && dist.omega_atoms.size() == 1);
  if (deterministic_base) {
    const double exact = dist.mean_xi_drift()[0];
    run.row("mean_xi_drift_e1", exact, 0, 0);
    run.gate("slope_matches_mean_xi_drift",
             std::abs(sd.slope - exact) <= kSigmas * sd.slope_se,
             fmt17((sd.slope - exact) / std::max(sd.slope_se, 1e-300)));
    if (suite.ballistic)
      run.gate("Lambda_base_drift_zero",
               suite.per_f[1].ci_low <= 0 && 0 <= suite.per_f[1].ci_high,
               fmt17(suite.per_f[1].value));
  }
}

// ---------------------------------------------------------------- einstein

void drive_einstein(const ExperimentConfig& cfg, int threads, ExperimentRun& run) {
  EnvDistribution dist = cfg.has_environment() ? cfg.environment()
                                               : preset_environment("simple");
  std::vector<double> lambdas = require_lambdas(cfg, {0.1, 0.05, 0.02}, dist.kappa);
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  const size_t replicas = cfg.uint("replicas", 24);
  const size_t horizon = cfg.uint("horizon", 100000);
  const bool homog = dist.kind == DistKind::homogeneous;

  double exact_ratio = 0.0;
  if (homog) {
    const SitePair& cell = dist.atoms[0];
    exact_ratio = cell.xi.drift()[0];  // v = d(omega).e1 + lambda * d(xi).e1
    run.row("exact_v_over_lambda", exact_ratio, 0, 0);
  }

  for (size_t li = 0; li < lambdas.size(); ++li) {
    const double lambda = lambdas[li];
    if (lambda <= 0) throw ConfigError("einstein needs lambda > 0");
    std::vector<double> vs(replicas), occs(replicas);
    parallel_for(replicas, threads, [&](size_t r) {
      EnvironmentField field(dist, derive_key({run.seed, 0xE1u, r}));
      PerturbedView view(field, lambda);
      Stream rng({run.seed, 0xE2u, r, li});
      WalkPath path = simulate(view, origin(), horizon, rng);
      vs[r] = empirical_speed(path)[0];
      double occ = 0;
      Point x = path.start;
      for (size_t i = 0; i < path.length(); ++i) {
        occ += field.site(x).omega.p[0];
        step_inplace(x, path.steps[i]);
      }
      occs[r] = occ / static_cast<double>(path.length());
    });
    std::vector<double> ratio(replicas);
    for (size_t r = 0; r < replicas; ++r) ratio[r] = vs[r] / lambda;
    MeanCI rci = mean_ci(ratio);
    MeanCI oci = mean_ci(occs);
    const std::string tag = "_l" + fmt17(lambda);
    run.row("v_over_lambda" + tag, rci.mean, rci.stderr_,
            static_cast<double>(replicas));
    run.row("D11_hat" + tag, 2.0 * oci.mean, 2.0 * oci.stderr_,
            static_cast<double>(replicas));
    if (homog)
      run.gate("v_over_lambda_exact" + tag, rci.contains(exact_ratio),
               fmt17((rci.mean - exact_ratio) / std::max(rci.stderr_, 1e-300)));
    if (!homog && li + 1 == lambdas.size()) {
      const double d11 = 2.0 * oci.mean;
      const double rel = std::abs(rci.mean - d11) / std::max(d11, 1e-300);
      run.row("einstein_rel_dev", rel, 0, static_cast<double>(replicas));
      run.gate("einstein_within_10pct", rel <= 0.10, fmt17(rel));
    }
  }
}

}  // namespace

EnvDistribution random_proportional_dist(uint64_t key, bool balanced) {
  Stream g(key);
  const std::array<double, kMaxDim> e1{1.0, 0.0, 0.0, 0.0};
  std::vector<LocalEnv> atoms;
  double kappa = 1.0;
  for (int a = 0; a < 2; ++a) {
    LocalEnv w;
    w.d = 2;
    if (balanced) {
      const double u = 0.3 + 0.4 * g.next_unit();
      w.p = {u / 2, u / 2, (1 - u) / 2, (1 - u) / 2, 0, 0, 0, 0};
    } else {
      // tilt lives on the e2 axis; the e1 pair stays even so the
      // proportional xi row still sums to zero
      const double u = 0.3 + 0.4 * g.next_unit();
      const double rest = 1.0 - u;
      const double b = rest * (0.25 + 0.5 * g.next_unit());
      w.p = {u / 2, u / 2, b, rest - b, 0, 0, 0, 0};
    }
    kappa = std::min(kappa, min_entry(w));
    atoms.push_back(w);
  }
  for (auto& w : atoms) w.kappa = kappa;
  const double wt = 0.3 + 0.4 * g.next_unit();
  return EnvDistribution::proportional(atoms, {wt, 1.0 - wt}, e1, kappa);
}

EnvDistribution random_independent_product_dist(uint64_t key, int sign) {
  Stream g(key);
  EnvDistribution dist;
  dist.kind = DistKind::independent_product;
  dist.d = 2;
  double kappa = 1.0;
  for (int a = 0; a < 2; ++a) {
    LocalEnv w;
    w.d = 2;
    double tot = 0;
    for (int e = 0; e < 4; ++e) {
      w.p[e] = 0.4 + g.next_unit();
      tot += w.p[e];
    }
    for (int e = 0; e < 4; ++e) w.p[e] /= tot;
    kappa = std::min(kappa, min_entry(w));
    dist.omega_atoms.push_back(w);
  }
  for (auto& w : dist.omega_atoms) w.kappa = kappa;
  dist.kappa = kappa;
  const double wt = 0.35 + 0.3 * g.next_unit();
  dist.omega_weights = {wt, 1.0 - wt};

  // two xi atoms; the weighted mean of the e1 components is pinned to a
  // target with the requested sign
  const double m = sign * (0.05 + 0.25 * g.next_unit());
  const double a2 = -0.2 + 0.4 * g.next_unit();
  const double a1 = (0.5 * m - (1.0 - wt) * a2) / wt;
  const double b1 = -0.5 + g.next_unit(), b2 = -0.5 + g.next_unit();
  PerturbCell x1, x2;
  x1.d = x2.d = 2;
  x1.xi = {a1, -a1, b1, -b1, 0, 0, 0, 0};
  x2.xi = {a2, -a2, b2, -b2, 0, 0, 0, 0};
  dist.xi_atoms = {x1, x2};
  dist.xi_weights = {wt, 1.0 - wt};
  dist.validate();
  return dist;
}

bool ExperimentRun::ok() const {
  for (const auto& g : gates)
    if (!g.pass) return false;
  return true;
}

void ExperimentRun::row(const std::string& name, double value, double stderr_err,
                        double n, double censor) {
  rows.push_back(ResultRow{name, value, stderr_err, n, censor});
}

void ExperimentRun::gate(const std::string& name, bool pass,
                         const std::string& detail) {
  gates.push_back(GateCheck{name, pass, detail});
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int t = std::min<size_t>(threads, n);
  std::vector<std::exception_ptr> errs(n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w]() {
      for (size_t i = static_cast<size_t>(w); i < n; i += static_cast<size_t>(t)) {
        try {
          fn(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (size_t i = 0; i < n; ++i)
    if (errs[i]) std::rethrow_exception(errs[i]);
}

int resolve_threads(int cli_threads, const ExperimentConfig& cfg) {
  if (cli_threads > 0) return cli_threads;
  if (cfg.threads() > 0) return cfg.threads();
  if (const char* env = std::getenv("RWRE_LAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  return 1;
}

ExperimentRun run_experiment(const ExperimentConfig& cfg, int threads) {
  ExperimentRun run;
  run.experiment = cfg.experiment();
  run.seed = cfg.seed();
  run.config_hash = cfg.hash();
  try {
    if (cfg.experiment() == "girsanov")
      drive_girsanov(cfg, threads, run);
    else if (cfg.experiment() == "kalikow")
      drive_kalikow(cfg, threads, run);
    else if (cfg.experiment() == "harnack")
      drive_harnack(cfg, threads, run);
    else if (cfg.experiment() == "couple")
      drive_couple(cfg, threads, run);
    else if (cfg.experiment() == "regen")
      drive_regen(cfg, threads, run);
    else if (cfg.experiment() == "ballistic")
      drive_ballistic(cfg, threads, run);
    else if (cfg.experiment() == "einstein")
      drive_einstein(cfg, threads, run);
    else
      throw ConfigError("unknown experiment: " + cfg.experiment());
  } catch (const ConfigError&) {
    throw;  // CLI exit 1
  } catch (const std::exception& e) {
    run.extra["error"] = e.what();
    run.gate("completed", false, e.what());
    return run;
  }
  run.gate("completed", true);
  return run;
}

std::string results_csv(const ExperimentRun& run) {
  std::string out = "experiment,name,value,stderr,n_samples,censor_rate\n";
  for (const auto& r : run.rows) {
    out += run.experiment;
    out += ',';
    out += r.name;
    out += ',';
    out += fmt17(r.value);
    out += ',';
    out += fmt17(r.stderr_);
    out += ',';
    out += fmt17(r.n);
    out += ',';
    out += fmt17(r.censor);
    out += '\n';
  }
  return out;
}

nlohmann::json report_json(const ExperimentRun& run, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = run.experiment;
  j["seed"] = run.seed;
  j["config_hash"] = run.config_hash;
  j["config"] = cfg.raw();
  j["ok"] = run.ok();
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : run.rows)
    rows.push_back({{"name", r.name},
                    {"value", r.value},
                    {"stderr", r.stderr_},
                    {"n_samples", r.n},
                    {"censor_rate", r.censor}});
  j["rows"] = rows;
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : run.gates)
    gates.push_back({{"name", g.name}, {"pass", g.pass}, {"detail", g.detail}});
  j["gates"] = gates;
  j["extra"] = run.extra;
  return j;
}

void write_text(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace rwre

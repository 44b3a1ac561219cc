#include "rwre/coupling.hpp"

#include <cmath>
#include <cstdlib>

#include "rwre/check.hpp"
#include "rwre/domain.hpp"

namespace rwre {

double gambler_ruin(double q, int64_t i, int64_t j) {
  RWRE_CHECK(q > 0.0);
  RWRE_CHECK(i >= 1 && j >= 1);
  const double lq = std::log(q);
  const double di = static_cast<double>(i);
  const double dij = static_cast<double>(i + j);
  if (std::abs(lq) < 1e-12) return di / dij;
  // (q^i - 1) / (q^(i+j) - 1) via expm1 for stability near q = 1
  return std::expm1(di * lq) / std::expm1(dij * lq);
}

double never_visit_below(double q, int64_t j) {
  RWRE_CHECK(j >= 1);
  RWRE_CHECK_MSG(q > 1.0, "escape probability needs upward transience (q > 1)");
  return -std::expm1(-static_cast<double>(j) * std::log(q));
}

CouplingRun run_coupling(const PerturbedView& view, const LevelClock& clock,
                         const Point& start, const CouplingConfig& cfg,
                         Stream& rng) {
  const int d = view.field().d();
  const double kappa = view.field().kappa();
  const double lambda = view.lambda();
  RWRE_CHECK(lambda >= 0.0 && lambda < kappa);
  RWRE_CHECK(cfg.n_max >= 1);
  RWRE_CHECK(cfg.horizon > 0);
  const int64_t gap = clock.gap();
  const double up_marginal = 0.5 * (1.0 - lambda / kappa);

  CouplingRun run;
  const size_t nm = static_cast<size_t>(cfg.n_max);
  run.t_tilde.assign(nm + 1, 0);
  run.t_plus.assign(nm + 1, 0);
  run.t_minus.assign(nm + 1, 0);
  run.s_tilde.assign(nm + 1, 0);
  run.s_jump.assign(nm + 1, 0);
  run.s_drift.assign(nm + 1, 0);

  Stream drift_rng = rng.child(0xD5u);
  const double up_drift = 0.5 * (1.0 + lambda / kappa);

  Point x = start;
  int64_t h = 0;  // X.e1 displacement from start
  int64_t y = 0;
  int64_t zd = 0;        // drift chain, same jump clock as Y
  int64_t t_levels = 0;  // levels recorded on the |h| clock
  int64_t p_levels = 0, m_levels = 0;  // signed level clocks
  int64_t s_levels = 0;  // levels recorded on the Y clock
  int64_t d_levels = 0;  // levels recorded on the drift-chain clock

  for (size_t i = 1; i <= cfg.horizon; ++i) {
    const LocalEnv row = view.row(x);
    const int dir = rng.categorical(row.p.data(), 2 * d);
    step_inplace(x, dir);
    if (dir_axis(dir) == 0) {
      ++run.e1_moves;
      if (zd == 0) {
        zd = 1;
      } else {
        zd += drift_rng.next_unit() < up_drift ? 1 : -1;
      }
      while (d_levels < cfg.n_max && zd >= (d_levels + 1) * gap) {
        ++d_levels;
        run.s_drift[static_cast<size_t>(d_levels)] = run.e1_moves;
      }
      const int64_t h_next = h + dir_sign(dir);
      const bool inc = std::llabs(h_next) > std::llabs(h);
      if (y == 0) {
        y = 1;
      } else if (inc) {
        // p_tilde: chance the e1-excursion grows given an e1-axis move
        const double wp = row.p[0];
        const double wm = row.p[1];
        const double p_up = wp / (wp + wm);
        const double p_tilde = h >= 0 ? p_up : 1.0 - p_up;
        double pb = up_marginal / p_tilde;
        if (pb > 1.0) {
          RWRE_CHECK_MSG(pb <= 1.0 + 1e-9, "auxiliary coin out of range");
          pb = 1.0;
          ++run.clamped;
        }
        if (rng.next_unit() < pb) {
          y += 1;
          ++run.y_up;
        } else {
          y -= 1;
          ++run.y_down;
        }
      } else {
        y -= 1;
        ++run.y_down;
      }
      h = h_next;
    }
    RWRE_CHECK_MSG(y >= 0, "auxiliary height went negative");
    const int64_t slack = std::llabs(h) - y;
    RWRE_CHECK_MSG(slack >= 0, "auxiliary height overtook the excursion");
    RWRE_CHECK_MSG(slack % 2 == 0, "excursion parity broken");
    while (t_levels < cfg.n_max && std::llabs(h) >= (t_levels + 1) * gap) {
      ++t_levels;
      run.t_tilde[static_cast<size_t>(t_levels)] = i;
    }
    while (p_levels < cfg.n_max && h >= (p_levels + 1) * gap) {
      ++p_levels;
      run.t_plus[static_cast<size_t>(p_levels)] = i;
    }
    while (m_levels < cfg.n_max && -h >= (m_levels + 1) * gap) {
      ++m_levels;
      run.t_minus[static_cast<size_t>(m_levels)] = i;
    }
    while (s_levels < cfg.n_max && y >= (s_levels + 1) * gap) {
      ++s_levels;
      run.s_tilde[static_cast<size_t>(s_levels)] = i;
      run.s_jump[static_cast<size_t>(s_levels)] = run.e1_moves;
      RWRE_CHECK_MSG(run.t_tilde[static_cast<size_t>(s_levels)] > 0 &&
                         run.t_tilde[static_cast<size_t>(s_levels)] <=
                             run.s_tilde[static_cast<size_t>(s_levels)],
                     "level domination order broken");
    }
    run.steps = i;
    if (t_levels >= cfg.n_max && s_levels >= cfg.n_max &&
        d_levels >= cfg.n_max) {
      run.complete = true;
      break;
    }
  }
  run.final_h = h;
  run.final_y = y;
  return run;
}

double z_up_probability(double lambda, double kappa) {
  RWRE_CHECK(kappa > 0.0);
  RWRE_CHECK(lambda >= 0.0 && lambda < kappa);
  return 0.5 * (1.0 - lambda / kappa);
}

double z_drift_up_probability(double lambda, double kappa) {
  RWRE_CHECK(kappa > 0.0);
  RWRE_CHECK(lambda >= 0.0 && lambda < kappa);
  return 0.5 * (1.0 + lambda / kappa);
}

namespace {

double reflected_expected_hit(double u, int64_t height) {
  RWRE_CHECK(height >= 1);
  const int n = static_cast<int>(height);
  // states 0..height-1, absorbed at height; reflection: from 0 always up
  std::vector<Triplet> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
  for (int k = 0; k < n; ++k) {
    trip.emplace_back(k, k, 1.0);
    if (k == 0) {
      if (n > 1) trip.emplace_back(0, 1, -1.0);
    } else {
      if (k + 1 < n) trip.emplace_back(k, k + 1, -u);
      trip.emplace_back(k, k - 1, -(1.0 - u));
    }
  }
  LinearSolver solver(n, trip, SolveRoute::automatic);
  Eigen::VectorXd t = solver.solve(rhs);
  return t[0];
}

}  // namespace

double z_expected_hit(double lambda, double kappa, int64_t height) {
  return reflected_expected_hit(z_up_probability(lambda, kappa), height);
}

double z_drift_expected_hit(double lambda, double kappa, int64_t height) {
  return reflected_expected_hit(z_drift_up_probability(lambda, kappa), height);
}

double z_top_probability(double lambda, double kappa, int64_t height) {
  RWRE_CHECK(height >= 2);
  const double u = z_up_probability(lambda, kappa);
  const double q = u / (1.0 - u);
  return 1.0 - gambler_ruin(q, height - 1, 1);
}

double z_drift_top_probability(double lambda, double kappa, int64_t height) {
  RWRE_CHECK(height >= 2);
  const double u = z_drift_up_probability(lambda, kappa);
  const double q = u / (1.0 - u);
  return 1.0 - gambler_ruin(q, height - 1, 1);
}

size_t simulate_z_hit(double lambda, double kappa, int64_t height, Stream& rng,
                      size_t cap) {
  RWRE_CHECK(height >= 1);
  const double u = z_up_probability(lambda, kappa);
  int64_t z = 0;
  for (size_t i = 1; i <= cap; ++i) {
    if (z == 0) {
      z = 1;
    } else if (rng.next_unit() < u) {
      z += 1;
    } else {
      z -= 1;
    }
    if (z >= height) return i;
  }
  RWRE_CHECK_MSG(false, "reflected chain failed to reach the target height");
  return 0;
}

}  // namespace rwre

#include "rwre/regen.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/check.hpp"
#include "rwre/stats.hpp"

namespace rwre {

namespace {

inline int pmod_int(int64_t v, int m) {
  int r = static_cast<int>(v % m);
  return r < 0 ? r + m : r;
}

// signed residue of v nearest zero
inline int64_t cmod(int64_t v, int m) {
  int r = pmod_int(v, m);
  return r <= m / 2 ? r : r - m;
}

}  // namespace

GapLaws::GapLaws(const PerturbedView& view, const LevelClock& clock,
                 int64_t height, const Point& anchor, const RegenKnobs& knobs)
    : height_(height), half_gap_(clock.half_gap) {
  RWRE_CHECK(knobs.bottom_gaps >= 1);
  const int64_t gap = clock.gap();
  Slab deep;
  deep.d = view.field().d();
  deep.lo = height - knobs.bottom_gaps * gap;
  deep.hi = height + gap;
  deep.period = knobs.period;
  deep.anchor = anchor;
  deep_ = std::make_unique<SlabSystem>(deep, view, knobs.route);

  Slab one;
  one.d = deep.d;
  one.lo = height;
  one.hi = height + gap;
  one.period = knobs.period;
  one.anchor = anchor;
  gap_ = std::make_unique<SlabSystem>(one, view, knobs.route);
}

const GapLawPair& GapLaws::at(const Point& entry) {
  RWRE_CHECK_MSG(entry[0] == height_, "entry is not on the level");
  const int lat = deep_->lat_of(entry);
  auto it = cache_.find(lat);
  if (it != cache_.end()) return it->second;

  GapLawPair pair;
  {
    SlabExitLaw law = deep_->exit_law(entry);
    RWRE_CHECK_MSG(law.up_mass > 0.0, "deep band never exits upward");
    pair.top = law.top / law.up_mass;
    pair.top_up = law.up_mass;
  }
  {
    Point mid = entry;
    mid[0] += half_gap_;
    SlabExitLaw law = gap_->exit_law(mid);
    RWRE_CHECK_MSG(law.up_mass > 0.0, "one-gap band never exits upward");
    pair.mu1 = law.top / law.up_mass;
    pair.mu1_up = law.up_mass;
  }
  return cache_.emplace(lat, std::move(pair)).first->second;
}

Point GapLaws::top_rep(int lat, const Point& near) const {
  const Slab& s = deep_->slab();
  Point p{};
  p[0] = s.hi;
  int rem = lat;
  for (int j = 1; j < s.d; ++j) {
    const int o = rem % s.period;
    rem /= s.period;
    p[j] = near[j] + cmod(s.anchor[j] + o - near[j], s.period);
  }
  return p;
}

BetaFit fit_beta(const PerturbedView& view, const LevelClock& clock,
                 const std::vector<Point>& entries,
                 const std::vector<double>& candidates,
                 const RegenKnobs& knobs) {
  RWRE_CHECK(!entries.empty());
  BetaFit fit;
  double floor_ratio = 0.0;
  bool first = true;
  for (const Point& entry : entries) {
    GapLaws laws(view, clock, entry[0], entry, knobs);
    const GapLawPair& pair = laws.at(entry);
    double mn = 0.0;
    bool any = false;
    for (Eigen::Index i = 0; i < pair.mu1.size(); ++i) {
      if (pair.mu1[i] <= 1e-14) continue;
      const double r = pair.top[i] / pair.mu1[i];
      if (!any || r < mn) mn = r;
      any = true;
    }
    RWRE_CHECK_MSG(any, "minorizing law has no mass");
    fit.site_min_ratio.push_back(mn);
    if (first || mn < floor_ratio) floor_ratio = mn;
    first = false;
  }
  std::vector<double> cands = candidates;
  std::sort(cands.begin(), cands.end(), std::greater<double>());
  for (double c : cands) {
    RWRE_CHECK(c > 0.0 && c < 1.0);
    if (c <= floor_ratio + 1e-12) {
      fit.beta = c;
      fit.ok = true;
      break;
    }
  }
  return fit;
}

EndpointChain::EndpointChain(const PerturbedView& view, const LevelClock& clock,
                             double beta, const Point& start, int levels,
                             const RegenKnobs& knobs)
    : view_(&view), clock_(clock), beta_(beta), start_(start), levels_(levels),
      knobs_(knobs) {
  RWRE_CHECK(levels_ >= 1);
  RWRE_CHECK(beta_ >= 0.0 && beta_ < 1.0);
  laws_.resize(static_cast<size_t>(levels_));
  for (int j = 0; j < levels_; ++j) {
    laws_[static_cast<size_t>(j)] = std::make_unique<GapLaws>(
        *view_, clock_, start_[0] + j * clock_.gap(), start_, knobs_);
  }
}

Point EndpointChain::sample(Stream& rng, size_t* mu0_clipped) {
  Point cur = start_;
  for (int j = 0; j < levels_; ++j) {
    GapLaws& gl = *laws_[static_cast<size_t>(j)];
    const GapLawPair& pair = gl.at(cur);
    const int coin = rng.bernoulli(beta_);
    Eigen::VectorXd law;
    if (coin) {
      law = pair.mu1;
    } else {
      law = (pair.top - beta_ * pair.mu1) / (1.0 - beta_);
      if (law.minCoeff() < -1e-12 && mu0_clipped) ++*mu0_clipped;
      law = law.cwiseMax(0.0);
    }
    const int lat = rng.categorical(law.data(), static_cast<int>(law.size()));
    cur = gl.top_rep(lat, cur);
  }
  return cur;
}

ConstructedSegments sample_constructed_path(const PerturbedView& view,
                                            const LevelClock& clock,
                                            double beta, const Point& start,
                                            int levels, Stream& coin_rng,
                                            Stream& path_rng,
                                            const RegenKnobs& knobs) {
  RWRE_CHECK(levels >= 1);
  RWRE_CHECK(beta >= 0.0 && beta < 1.0);
  ConstructedSegments out;
  out.path.start = start;
  out.path.d = view.field().d();
  out.entries.push_back(start);
  Point cur = start;
  const size_t cap = std::max<size_t>(
      20000, static_cast<size_t>(200.0 * static_cast<double>(clock.gap()) /
                                 std::max(view.lambda(), 1e-3)));
  for (int j = 0; j < levels; ++j) {
    GapLaws gl(view, clock, cur[0], cur, knobs);
    const GapLawPair& pair = gl.at(cur);
    const int coin = coin_rng.bernoulli(beta);
    out.coins.push_back(coin);
    Eigen::VectorXd law;
    if (coin) {
      law = pair.mu1;
    } else {
      law = (pair.top - beta * pair.mu1) / (1.0 - beta);
      if (law.minCoeff() < -1e-12) ++out.mu0_clipped;
      law = law.cwiseMax(0.0);
    }
    const int lat =
        path_rng.categorical(law.data(), static_cast<int>(law.size()));
    Eigen::VectorXd h = gl.deep().absorption_column_top(lat);
    WalkPath seg =
        gl.deep().sample_conditioned_to_top(cur, lat, h, path_rng, cap);
    for (uint8_t s : seg.steps) out.path.steps.push_back(s);
    cur = seg.end();
    RWRE_CHECK(cur[0] == gl.height() + clock.gap());
    out.entries.push_back(cur);
  }
  return out;
}

ScanResult scan_regenerations(const LevelTrace& trace, int confirm_levels,
                              size_t confirm_steps) {
  RWRE_CHECK(trace.gap >= 2);
  RWRE_CHECK(confirm_levels >= 1);
  const auto& h = trace.heights;
  const auto& entry = trace.entry_time;
  const auto& coins = trace.coins;
  RWRE_CHECK(!h.empty());
  const size_t last = h.size() - 1;
  const int64_t gap = trace.gap;

  ScanResult res;
  size_t anchor_level = 0;
  int64_t m_gaps = 0;
  int k_count = 0;

  size_t n = anchor_level;
  while (true) {
    if (n < anchor_level + static_cast<size_t>(m_gaps)) {
      n = anchor_level + static_cast<size_t>(m_gaps);
      continue;
    }
    if (n >= coins.size() || n + 1 >= entry.size()) {
      // no further candidate can be formed inside the horizon
      ++res.censored;
      break;
    }
    if (!coins[n]) {
      ++n;
      continue;
    }
    ++k_count;
    const size_t s_time = entry[n + 1];
    const int64_t hs = static_cast<int64_t>(n + 1) * gap;
    RWRE_CHECK(h[s_time] == hs);
    // resolve: full-gap backtrack vs confirmed advance
    int64_t mx = 0;
    size_t i = s_time + 1;
    bool resolved = false;
    for (; i <= last; ++i) {
      const int64_t rel = h[i] - hs;
      if (rel > mx) mx = rel;
      if (rel <= -gap) {
        // abandoned: future candidates must clear the excursion top
        const int64_t n_gaps = mx / gap + 1;
        m_gaps = static_cast<int64_t>(n + 1 - anchor_level) + n_gaps;
        n = anchor_level + static_cast<size_t>(m_gaps);
        resolved = true;
        break;
      }
      if (rel >= static_cast<int64_t>(confirm_levels) * gap &&
          i - s_time >= confirm_steps) {
        res.tau.push_back(s_time);
        res.tau_tilde.push_back(entry[n]);
        res.k_counts.push_back(k_count);
        k_count = 0;
        anchor_level = n + 1;
        m_gaps = 0;
        n = anchor_level;
        resolved = true;
        break;
      }
    }
    if (!resolved) {
      ++res.censored;
      break;
    }
  }
  return res;
}

ReplicaResult run_posterior_replica(const EnvDistribution& dist,
                                    uint64_t master_seed, uint64_t replica,
                                    const RegenRunConfig& cfg) {
  dist.validate();
  RWRE_CHECK(cfg.beta >= 0.0 && cfg.beta < 1.0);
  ReplicaResult out;
  out.beta = cfg.beta;

  EnvironmentField field(dist, derive_key({master_seed, replica + 1}));
  PerturbedView view(field, cfg.lambda);
  const LevelClock clock = LevelClock::from_lambda(cfg.lambda);
  const int64_t gap = clock.gap();

  Stream walk_rng(derive_key({role_key(master_seed, Role::walk), replica}));
  const uint64_t coin_key =
      derive_key({role_key(master_seed, Role::coin), replica});

  WalkPath path = simulate(view, origin(), cfg.horizon, walk_rng);
  out.steps = path.length();
  std::vector<int64_t> heights = path.e1_track();

  // first-arrival time and entry point per level
  int64_t maxh = 0;
  for (int64_t v : heights) maxh = std::max(maxh, v);
  const size_t maxlev = static_cast<size_t>(maxh / gap);
  std::vector<size_t> entry_time(maxlev + 1, 0);
  std::vector<Point> entry_pt(maxlev + 1, path.start);
  {
    std::vector<uint8_t> seen(maxlev + 1, 0);
    seen[0] = 1;
    Point pos = path.start;
    for (size_t i = 1; i < heights.size(); ++i) {
      step_inplace(pos, path.steps[i - 1]);
      const int64_t hv = heights[i];
      if (hv > 0 && hv % gap == 0) {
        const size_t lev = static_cast<size_t>(hv / gap);
        if (lev <= maxlev && !seen[lev]) {
          seen[lev] = 1;
          entry_time[lev] = i;
          entry_pt[lev] = pos;
        }
      }
    }
    for (size_t lev = 1; lev <= maxlev; ++lev) RWRE_CHECK(seen[lev]);
  }

  // posterior coin per level below the ceiling
  std::vector<uint8_t> coins;
  if (maxlev >= 1) {
    coins.resize(maxlev);
    for (size_t n = 0; n < maxlev; ++n) {
      GapLaws gl(view, clock, static_cast<int64_t>(n) * gap, entry_pt[n],
                 cfg.knobs);
      ++out.levels;
      const GapLawPair& pair = gl.at(entry_pt[n]);
      const int lat_w = gl.lat_of(entry_pt[n + 1]);
      const double top_w = pair.top[lat_w];
      RWRE_CHECK_MSG(top_w > 0.0, "realized entry carries no band mass");
      double p = cfg.beta * pair.mu1[lat_w] / top_w;
      if (p > 1.0) {
        ++out.clamp_high;
        p = 1.0;
      }
      ++out.coin_draws;
      coins[n] = uniform_at(coin_key, n) < p ? 1 : 0;
    }
  }

  LevelTrace trace;
  trace.heights = std::move(heights);
  trace.entry_time = entry_time;
  trace.coins = std::move(coins);
  trace.gap = gap;
  const size_t guard = static_cast<size_t>(
      cfg.knobs.confirm_steps_factor / (cfg.lambda * cfg.lambda));
  ScanResult scan =
      scan_regenerations(trace, cfg.knobs.confirm_levels, guard);
  out.censored = scan.censored;
  out.k_counts = scan.k_counts;
  out.tau = scan.tau;
  out.tau_tilde = scan.tau_tilde;
  for (size_t t : out.tau)
    out.tau_h.push_back(trace.heights[t]);

  if (out.tau.empty()) return out;

  // block pass: per-step functional sums and the no-backtrack invariant
  const size_t nf = cfg.fs.size();
  auto blank = [&]() {
    BlockSample b;
    b.fsum.assign(nf, 0.0);
    return b;
  };
  std::vector<BlockSample> buckets(out.tau.size() + 1, blank());
  std::vector<int64_t> min_after(out.tau.size(), INT64_MAX);
  Point pos = path.start;
  size_t bucket = 0;
  Point seg_start = path.start;
  std::vector<Point> tau_pos(out.tau.size(), path.start);
  for (size_t i = 0; i < path.length(); ++i) {
    if (bucket < out.tau.size() && i == out.tau[bucket]) {
      tau_pos[bucket] = pos;
      ++bucket;
      seg_start = pos;
    }
    if (nf > 0) {
      SitePair zeta = field.site(pos);
      for (size_t f = 0; f < nf; ++f)
        buckets[bucket].fsum[f] += cfg.fs[f].eval(zeta);
    }
    buckets[bucket].dtau += 1.0;
    step_inplace(pos, path.steps[i]);
    if (bucket >= 1 && bucket <= out.tau.size()) {
      min_after[bucket - 1] =
          std::min(min_after[bucket - 1], trace.heights[i + 1]);
    }
  }
  // invariant: after each confirmed regeneration the walk stays above the
  // regeneration height minus one gap
  for (size_t k = 0; k < out.tau.size(); ++k) {
    if (min_after[k] == INT64_MAX) continue;
    if (min_after[k] <= out.tau_h[k] - gap) ++out.invariant_violations;
  }

  // emit first block and interior stationary blocks; the trailing bucket is
  // censored
  auto fill_dx = [&](BlockSample& b, const Point& a, const Point& z) {
    for (int j = 0; j < path.d; ++j)
      b.dx[static_cast<size_t>(j)] = static_cast<double>(z[j] - a[j]);
    b.dx1 = b.dx[0];
  };
  out.first_block = buckets[0];
  fill_dx(out.first_block, path.start, tau_pos[0]);
  out.has_first = true;
  for (size_t k = 1; k < out.tau.size(); ++k) {
    BlockSample b = buckets[k];
    fill_dx(b, tau_pos[k - 1], tau_pos[k]);
    out.blocks.push_back(std::move(b));
  }
  return out;
}

LagCorrelation block_lag_correlation(
    const std::vector<std::vector<double>>& series, int lag) {
  RWRE_CHECK(lag >= 1);
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& s : series) {
    if (s.size() <= static_cast<size_t>(lag)) continue;
    for (size_t i = 0; i + static_cast<size_t>(lag) < s.size(); ++i) {
      x.push_back(s[i]);
      y.push_back(s[i + static_cast<size_t>(lag)]);
    }
  }
  LagCorrelation out;
  out.pairs = x.size();
  if (x.size() < 2) return out;
  CorrelationReport rep = correlation_ztest(x, y);
  out.corr = rep.corr;
  out.z = rep.z;
  return out;
}

}  // namespace rwre

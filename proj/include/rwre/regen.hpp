#pragma once

// Split-measure regeneration machinery. An auxiliary coin per level decides
// whether the walk's next level entry is drawn from the minorizing one-gap
// law mu1 or from the complement law mu0; a level whose coin came up heads
// and whose entry is never abandoned by a full-gap backtrack is a
// regeneration. Two equivalent samplers:
//   - prior coins + endpoint chain / Doob bridges (constructed measure),
//   - the plain quenched walk + posterior coins read off realized entries.
// Level laws come from band solves; band depth, lateral period and the
// no-return confirmation window are explicit numerical knobs.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/linsolve.hpp"
#include "rwre/rng.hpp"
#include "rwre/slab.hpp"
#include "rwre/walk.hpp"

namespace rwre {

struct RegenKnobs {
  int period = 96;          // lateral torus period for the band solves
  int bottom_gaps = 3;      // band depth below each level, in gaps
  int confirm_levels = 10;  // gaps of advance that confirm no full-gap return
  double confirm_steps_factor = 10.0;  // extra step guard: factor / lambda^2
  SolveRoute route = SolveRoute::automatic;
};

// Conditional next-level entry laws for one entry point, over lateral states.
struct GapLawPair {
  Eigen::VectorXd top;  // entry law of the next level, conditioned upward
  Eigen::VectorXd mu1;  // same target plane, started half a gap above through
                        // a one-gap band: the minorizing law
  double top_up = 0.0;  // unconditioned upward mass of the deep band
  double mu1_up = 0.0;  // of the one-gap band
};

// The two band factorizations for one level of one environment. Laws for
// entry points on the level share them; each new lateral entry costs one
// adjoint solve per band.
class GapLaws {
 public:
  GapLaws(const PerturbedView& view, const LevelClock& clock, int64_t height,
          const Point& anchor, const RegenKnobs& knobs);

  // entry[0] must equal the level height.
  const GapLawPair& at(const Point& entry);

  int lat_of(const Point& p) const { return deep_->lat_of(p); }
  // unwrapped representative of a top-plane lateral state, nearest `near`
  Point top_rep(int lat, const Point& near) const;
  const SlabSystem& deep() const { return *deep_; }
  const SlabSystem& one_gap() const { return *gap_; }
  int64_t height() const { return height_; }

 private:
  int64_t height_;
  int64_t half_gap_;
  std::unique_ptr<SlabSystem> deep_;
  std::unique_ptr<SlabSystem> gap_;
  std::unordered_map<int, GapLawPair> cache_;
};

struct BetaFit {
  double beta = 0.0;
  bool ok = false;
  // per probed entry: min over target states of top(w)/mu1(w)
  std::vector<double> site_min_ratio;
};

// Largest candidate below every probed minorization ratio. beta = 0 is
// always admissible; ok=false means no candidate fits (lambda too large or
// the band knobs too tight).
BetaFit fit_beta(const PerturbedView& view, const LevelClock& clock,
                 const std::vector<Point>& entries,
                 const std::vector<double>& candidates,
                 const RegenKnobs& knobs);

// Entry-point chain under prior coins: marginal law of the level-n entry.
class EndpointChain {
 public:
  EndpointChain(const PerturbedView& view, const LevelClock& clock,
                double beta, const Point& start, int levels,
                const RegenKnobs& knobs);

  // One draw of the entry point at the top level. Coins are Bernoulli(beta);
  // mu0 mass clipped at zero is counted.
  Point sample(Stream& rng, size_t* mu0_clipped = nullptr);

 private:
  const PerturbedView* view_;
  LevelClock clock_;
  double beta_;
  Point start_;
  int levels_;
  RegenKnobs knobs_;
  std::vector<std::unique_ptr<GapLaws>> laws_;  // per level, anchored at start
};

// Stitched constructed path: prior coins, endpoints from the mixture laws,
// segments from band-conditioned bridges.
struct ConstructedSegments {
  WalkPath path;
  std::vector<int> coins;      // per level crossed
  std::vector<Point> entries;  // entry per level, entries[0] = start
  size_t mu0_clipped = 0;
};
ConstructedSegments sample_constructed_path(const PerturbedView& view,
                                            const LevelClock& clock,
                                            double beta, const Point& start,
                                            int levels, Stream& coin_rng,
                                            Stream& path_rng,
                                            const RegenKnobs& knobs);

// One inter-regeneration block of the quenched walk.
struct BlockSample {
  double dtau = 0.0;                 // steps
  double dx1 = 0.0;                  // e1 displacement (lattice units)
  std::array<double, kMaxDim> dx{};  // full displacement
  std::vector<double> fsum;          // per registered local function
};

struct ReplicaResult {
  std::vector<BlockSample> blocks;  // stationary blocks, k >= 1
  BlockSample first_block;          // [0, tau_1), kept apart
  bool has_first = false;
  std::vector<size_t> tau;        // confirmed regeneration times
  std::vector<int64_t> tau_h;     // e1 displacement at tau
  std::vector<size_t> tau_tilde;  // arrival at the coin level below each tau
  std::vector<int> k_counts;      // candidates consumed per confirmed regen
  size_t censored = 0;            // candidates unresolved at the horizon
  size_t invariant_violations = 0;
  size_t clamp_low = 0;   // posterior probabilities clipped into [0,1]
  size_t clamp_high = 0;
  size_t coin_draws = 0;
  size_t steps = 0;
  size_t levels = 0;  // band solve pairs performed
  double beta = 0.0;
};

struct RegenRunConfig {
  double lambda = 0.1;
  double beta = 0.25;
  size_t horizon = 50000;
  std::vector<LocalFunction> fs;
  RegenKnobs knobs;
};

// Simulates the quenched walk in a fresh environment keyed by (master,
// replica), reads posterior coins off the realized level entries, and
// extracts regeneration blocks. Coin uniforms are keyed by level index only,
// so replicas share them across lambda values.
ReplicaResult run_posterior_replica(const EnvDistribution& dist,
                                    uint64_t master_seed, uint64_t replica,
                                    const RegenRunConfig& cfg);

// Regeneration scanner on precomputed level data; exposed for oracle tests.
struct LevelTrace {
  std::vector<int64_t> heights;   // h_i per step, h_0 = 0
  std::vector<size_t> entry_time;  // first arrival per level, index = level
  std::vector<uint8_t> coins;      // coin per level (defined below top level)
  int64_t gap = 0;
};
struct ScanResult {
  std::vector<size_t> tau;
  std::vector<size_t> tau_tilde;
  std::vector<int> k_counts;
  size_t censored = 0;
};
ScanResult scan_regenerations(const LevelTrace& trace, int confirm_levels,
                              size_t confirm_steps);

// Pooled lag correlation of per-replica block series; pairs never straddle
// replicas.
struct LagCorrelation {
  double corr = 0.0;
  double z = 0.0;
  size_t pairs = 0;
};
LagCorrelation block_lag_correlation(
    const std::vector<std::vector<double>>& series, int lag);

}  // namespace rwre

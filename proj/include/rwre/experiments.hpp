#pragma once

// Experiment drivers shared by the CLI and the test harness. Each driver
// turns a validated config into an ExperimentRun: estimate rows (always with
// n and censoring), pass/fail gates, and a free-form JSON payload. Results
// are deterministic in (config, seed) for every thread count: replicas write
// into preallocated slots and reductions run in slot order.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwre/config.hpp"

namespace rwre {

struct ResultRow {
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
  double n = 0.0;
  double censor = 0.0;
};

struct GateCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentRun {
  std::string experiment;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  std::vector<ResultRow> rows;
  std::vector<GateCheck> gates;
  nlohmann::json extra = nlohmann::json::object();

  bool ok() const;
  void row(const std::string& name, double value, double stderr_err = 0.0,
           double n = 0.0, double censor = 0.0);
  void gate(const std::string& name, bool pass, const std::string& detail = "");
};

// Static index split over [0, n); worker t owns i with i % threads == t.
// Exceptions propagate from the smallest failing index.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

// Precedence: explicit CLI value > config "threads" > RWRE_LAB_THREADS > 1.
int resolve_threads(int cli_threads, const ExperimentConfig& cfg);

// Dispatch on cfg.experiment(). Internal errors surface as a failed
// "completed" gate with the message in extra["error"], so partial rows
// survive to the output files.
ExperimentRun run_experiment(const ExperimentConfig& cfg, int threads);

// Frozen schema: experiment,name,value,stderr,n_samples,censor_rate.
std::string results_csv(const ExperimentRun& run);
nlohmann::json report_json(const ExperimentRun& run, const ExperimentConfig& cfg);

void write_text(const std::string& path, const std::string& content);

// Random distribution generators used by stress runs: two-atom proportional
// cells along e1 (fully balanced rows, or rows tilted on the e2 axis; the
// e1 pair is always even so the tilt row stays valid), and
// independent-product cells whose mean perturbation drift along e1 has the
// requested sign (+1 / -1), bounded away from zero.
EnvDistribution random_proportional_dist(uint64_t key, bool balanced);
EnvDistribution random_independent_product_dist(uint64_t key, int sign);

}  // namespace rwre

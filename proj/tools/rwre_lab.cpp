// Experiment runner: one subcommand per experiment, JSON config in, CSV and
// JSON report out. Exit 0 on success, 2 when a gate fails (partial results
// are still written), 1 on a config problem (nothing written).

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rwre/config.hpp"
#include "rwre/experiments.hpp"

namespace {

struct Args {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int threads = 0;
};

int run_one(const std::string& name, const Args& args) {
  rwre::ExperimentConfig cfg;
  try {
    cfg = rwre::ExperimentConfig::load(args.config_path);
    if (cfg.experiment() != name)
      throw rwre::ConfigError("config is for experiment '" + cfg.experiment() +
                              "', subcommand is '" + name + "'");
    if (args.seed_set) cfg.override_seed(args.seed);
  } catch (const rwre::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }

  const int threads = rwre::resolve_threads(args.threads, cfg);
  const std::string out =
      !args.out_dir.empty() ? args.out_dir : cfg.out_dir();

  rwre::ExperimentRun run = rwre::run_experiment(cfg, threads);
  try {
    rwre::write_text(out + "/results.csv", rwre::results_csv(run));
    rwre::write_text(out + "/report.json",
                     rwre::report_json(run, cfg).dump(2) + "\n");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "write error: %s\n", e.what());
    return 2;
  }
  for (const auto& g : run.gates)
    std::printf("[%s] %s%s%s\n", g.pass ? "pass" : "FAIL", g.name.c_str(),
                g.detail.empty() ? "" : ": ", g.detail.c_str());
  std::printf("%s: %zu rows -> %s (threads=%d, seed=%llu)\n", name.c_str(),
              run.rows.size(), out.c_str(), threads,
              static_cast<unsigned long long>(run.seed));
  return run.ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perturbed random walk experiment runner"};
  app.require_subcommand(1);

  static const char* kNames[] = {"einstein", "regen",  "kalikow", "harnack",
                                 "ballistic", "couple", "girsanov"};
  Args args;
  std::string chosen;
  for (const char* name : kNames) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name +
                                                 " experiment");
    sub->add_option("--config", args.config_path, "JSON config file")
        ->required();
    sub->add_option("--seed", args.seed, "master seed override");
    sub->add_option("--out", args.out_dir, "output directory override");
    sub->add_option("--threads", args.threads,
                    "worker threads (RWRE_LAB_THREADS as fallback)");
    sub->callback([name, &chosen, sub, &args]() {
      chosen = name;
      args.seed_set = sub->count("--seed") > 0;
    });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return run_one(chosen, args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

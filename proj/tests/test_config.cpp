#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "rwre/config.hpp"
#include "rwre/experiments.hpp"

using namespace rwre;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("minimal config carries defaults") {
  ExperimentConfig cfg = ExperimentConfig::from_json({{"experiment", "einstein"}});
  CHECK(cfg.experiment() == "einstein");
  CHECK(cfg.seed() == 1);
  CHECK(cfg.threads() == 0);  // unset, resolution falls through
  CHECK(cfg.out_dir() == "out");
  CHECK(!cfg.has_environment());
  CHECK(cfg.num("lambda", 0.25) == 0.25);
  CHECK(cfg.uint("replicas", 7) == 7);
  CHECK(cfg.flag("verbose", true));
}

TEST_CASE("malformed configs are rejected as config errors") {
  CHECK_THROWS_AS(ExperimentConfig::from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 3}}), ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json({{"experiment", "warp"}}), ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json({{"experiment", "regen"}, {"seed", "x"}}),
      ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json({{"experiment", "regen"}, {"threads", -2}}),
      ConfigError);
  // invalid environments surface at load, not at run time
  CHECK_THROWS_AS(ExperimentConfig::from_json(
                      {{"experiment", "regen"},
                       {"environment", {{"kind", "mystery"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/rwre.json"), ConfigError);
}

TEST_CASE("seed override rewrites the stored document and the hash") {
  ExperimentConfig cfg =
      ExperimentConfig::from_json({{"experiment", "couple"}, {"seed", 5}});
  const uint64_t h0 = cfg.hash();
  cfg.override_seed(6);
  CHECK(cfg.seed() == 6);
  CHECK(cfg.raw()["seed"] == 6);
  CHECK(cfg.hash() != h0);
  cfg.override_seed(5);
  CHECK(cfg.hash() == h0);
}

TEST_CASE("config hash ignores key insertion order") {
  json a, b;
  a["experiment"] = "harnack";
  a["seed"] = 9;
  a["lambda"] = 0.1;
  b["lambda"] = 0.1;
  b["seed"] = 9;
  b["experiment"] = "harnack";
  CHECK(json_fnv_hash(a) == json_fnv_hash(b));
  b["lambda"] = 0.2;
  CHECK(json_fnv_hash(a) != json_fnv_hash(b));
}

TEST_CASE("explicit environments parse into validated distributions") {
  json j = {{"experiment", "einstein"},
            {"environment",
             {{"kind", "homogeneous"},
              {"omega", {0.4, 0.2, 0.2, 0.2}},
              {"xi", {0.3, -0.3, 0.0, 0.0}}}}};
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  REQUIRE(cfg.has_environment());
  EnvDistribution dist = cfg.environment();
  CHECK(dist.kind == DistKind::homogeneous);
  CHECK(dist.kappa == doctest::Approx(0.2));  // smallest omega entry
  CHECK(dist.atoms[0].xi.xi[0] == 0.3);

  json fs = {{"kind", "finite_support"},
             {"ell", {1.0, 0.0}},
             {"atoms",
              {{{"omega", {0.3, 0.3, 0.2, 0.2}}, {"weight", 3.0}},
               {{"omega", {0.2, 0.2, 0.3, 0.3}}, {"weight", 1.0}}}}};
  EnvDistribution d2 = parse_environment(fs);
  CHECK(d2.kind == DistKind::finite_support);
  CHECK(d2.weights[0] == doctest::Approx(0.75));  // normalized
  CHECK(d2.weights[1] == doctest::Approx(0.25));
  CHECK(d2.atoms[0].xi.xi[0] == doctest::Approx(0.3));  // proportional fallback

  // a kappa above the smallest entry is rejected by validation
  json bad = fs;
  bad["kappa"] = 0.25;
  CHECK_THROWS_AS(parse_environment(bad), ConfigError);
}

TEST_CASE("presets resolve by name with optional kappa override") {
  for (const char* name : {"simple", "two_atom_balanced", "two_atom_wide",
                           "two_atom_drifted", "independent_mix"}) {
    CAPTURE(name);
    EnvDistribution dist = parse_environment(json(name));
    CHECK(dist.d == 2);
    CHECK(dist.kappa > 0.0);
  }
  CHECK_THROWS_AS(parse_environment(json("no_such_preset")), ConfigError);

  EnvDistribution narrowed =
      parse_environment({{"preset", "two_atom_balanced"}, {"kappa", 0.12}});
  CHECK(narrowed.kappa == doctest::Approx(0.12));
  CHECK_THROWS_AS(
      parse_environment({{"preset", "two_atom_balanced"}, {"kappa", 0.3}}),
      ConfigError);
}

TEST_CASE("csv rows freeze the schema and full double precision") {
  ExperimentRun run;
  run.experiment = "couple";
  run.row("lambda2_T_over_n", 1.0 / 3.0, 0.5, 200, 0.125);
  const std::string csv = results_csv(run);
  CHECK(csv.find("experiment,name,value,stderr,n_samples,censor_rate\n") == 0);
  CHECK(csv.find("couple,lambda2_T_over_n,0.33333333333333331,0.5,200,0.125\n") !=
        std::string::npos);
}

TEST_CASE("report json carries identity, rows and gates") {
  ExperimentConfig cfg = ExperimentConfig::from_json(
      {{"experiment", "girsanov"}, {"seed", 11}, {"count", 3}});
  ExperimentRun run;
  run.experiment = cfg.experiment();
  run.seed = cfg.seed();
  run.config_hash = cfg.hash();
  run.row("unit_mean_dev", 2e-13, 0, 3);
  run.gate("unit_mean", true, "max dev 2e-13");
  json rep = report_json(run, cfg);
  CHECK(rep["experiment"] == "girsanov");
  CHECK(rep["seed"] == 11);
  CHECK(rep["config_hash"] == cfg.hash());
  CHECK(rep["ok"] == true);
  CHECK(rep["config"]["count"] == 3);
  REQUIRE(rep["rows"].size() == 1);
  CHECK(rep["rows"][0]["name"] == "unit_mean_dev");
  REQUIRE(rep["gates"].size() == 1);
  CHECK(rep["gates"][0]["pass"] == true);
}

TEST_CASE("parallel slots agree across thread counts") {
  auto fill = [](int threads) {
    std::vector<double> out(257, 0.0);
    parallel_for(out.size(), threads, [&](size_t i) {
      out[i] = static_cast<double>(i * i % 1013);
    });
    return out;
  };
  const auto base = fill(1);
  CHECK(fill(2) == base);
  CHECK(fill(4) == base);
  CHECK(fill(7) == base);
}

TEST_CASE("parallel exceptions surface from the smallest failing index") {
  std::atomic<int> touched{0};
  try {
    parallel_for(64, 4, [&](size_t i) {
      ++touched;
      if (i == 13 || i == 40) throw std::runtime_error("slot " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "slot 13");
  }
  CHECK(touched.load() > 0);
}

TEST_CASE("thread resolution prefers cli, then config, then environment") {
  ExperimentConfig with = ExperimentConfig::from_json(
      {{"experiment", "einstein"}, {"threads", 3}});
  ExperimentConfig without =
      ExperimentConfig::from_json({{"experiment", "einstein"}});
  unsetenv("RWRE_LAB_THREADS");
  CHECK(resolve_threads(8, with) == 8);
  CHECK(resolve_threads(0, with) == 3);
  CHECK(resolve_threads(0, without) == 1);
  setenv("RWRE_LAB_THREADS", "5", 1);
  CHECK(resolve_threads(0, without) == 5);
  CHECK(resolve_threads(0, with) == 3);
  CHECK(resolve_threads(2, without) == 2);
  setenv("RWRE_LAB_THREADS", "junk", 1);
  CHECK(resolve_threads(0, without) == 1);
  unsetenv("RWRE_LAB_THREADS");
}

}  // TEST_SUITE

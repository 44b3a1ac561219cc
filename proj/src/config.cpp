#include "rwre/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>

namespace rwre {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

double min_row_entry(const LocalEnv& w) {
  double m = w.p[0];
  for (int e = 1; e < w.dirs(); ++e) m = std::min(m, w.p[e]);
  return m;
}

std::array<double, kMaxDirs> read_dirs(const json& j, int d, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != 2 * d)
    fail(where + ": expected array of length " + std::to_string(2 * d));
  std::array<double, kMaxDirs> out{};
  for (int e = 0; e < 2 * d; ++e) {
    if (!j[e].is_number()) fail(where + ": non-numeric entry");
    out[e] = j[e].get<double>();
  }
  return out;
}

std::array<double, kMaxDim> read_vec(const json& j, int d, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    fail(where + ": expected array of length " + std::to_string(d));
  std::array<double, kMaxDim> out{};
  for (int i = 0; i < d; ++i) out[i] = j[i].get<double>();
  return out;
}

std::vector<double> read_weights(const json& j, size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) fail(where + ": weight count mismatch");
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) w[i] = j[i].get<double>();
  return w;
}

EnvDistribution explicit_environment(const json& j) {
  if (!j.contains("kind") || !j["kind"].is_string()) fail("environment: missing kind");
  const std::string kind = j["kind"].get<std::string>();
  const int d = j.value("d", 2);
  if (d < 2 || d > kMaxDim) fail("environment: d out of range");

  EnvDistribution dist;
  dist.d = d;

  auto row_from = [&](const json& jr, const std::string& where) {
    LocalEnv w;
    w.d = d;
    w.p = read_dirs(jr, d, where);
    return w;
  };
  auto xi_from = [&](const json& jx, const std::string& where) {
    PerturbCell x;
    x.d = d;
    x.xi = read_dirs(jx, d, where);
    return x;
  };

  if (kind == "homogeneous") {
    dist.kind = DistKind::homogeneous;
    if (!j.contains("omega")) fail("environment: homogeneous needs omega");
    LocalEnv w = row_from(j["omega"], "environment.omega");
    PerturbCell x;
    if (j.contains("xi")) {
      x = xi_from(j["xi"], "environment.xi");
    } else if (j.contains("ell")) {
      x = proportional_cell(w, read_vec(j["ell"], d, "environment.ell"));
    } else {
      fail("environment: homogeneous needs xi or ell");
    }
    dist.atoms = {SitePair{w, x}};
    dist.weights = {1.0};
  } else if (kind == "finite_support") {
    dist.kind = DistKind::finite_support;
    if (!j.contains("atoms") || !j["atoms"].is_array() || j["atoms"].empty())
      fail("environment: finite_support needs atoms");
    for (const auto& ja : j["atoms"]) {
      LocalEnv w = row_from(ja.at("omega"), "environment.atoms.omega");
      PerturbCell x;
      if (ja.contains("xi")) {
        x = xi_from(ja["xi"], "environment.atoms.xi");
      } else if (j.contains("ell")) {
        x = proportional_cell(w, read_vec(j["ell"], d, "environment.ell"));
      } else {
        fail("environment: atom needs xi (or top-level ell)");
      }
      dist.atoms.push_back(SitePair{w, x});
      dist.weights.push_back(ja.value("weight", 1.0));
    }
    double tot = 0;
    for (double w : dist.weights) tot += w;
    if (tot <= 0) fail("environment: nonpositive total weight");
    for (double& w : dist.weights) w /= tot;
  } else if (kind == "proportional") {
    dist.kind = DistKind::proportional;
    if (!j.contains("omega_atoms") || !j["omega_atoms"].is_array() || j["omega_atoms"].empty())
      fail("environment: proportional needs omega_atoms");
    for (const auto& jr : j["omega_atoms"])
      dist.omega_atoms.push_back(row_from(jr, "environment.omega_atoms"));
    dist.omega_weights =
        j.contains("omega_weights")
            ? read_weights(j["omega_weights"], dist.omega_atoms.size(),
                           "environment.omega_weights")
            : std::vector<double>(dist.omega_atoms.size(),
                                  1.0 / static_cast<double>(dist.omega_atoms.size()));
    if (!j.contains("ell")) fail("environment: proportional needs ell");
    dist.ell = read_vec(j["ell"], d, "environment.ell");
  } else if (kind == "independent_product") {
    dist.kind = DistKind::independent_product;
    if (!j.contains("omega_atoms") || !j.contains("xi_atoms"))
      fail("environment: independent_product needs omega_atoms and xi_atoms");
    for (const auto& jr : j["omega_atoms"])
      dist.omega_atoms.push_back(row_from(jr, "environment.omega_atoms"));
    for (const auto& jx : j["xi_atoms"])
      dist.xi_atoms.push_back(xi_from(jx, "environment.xi_atoms"));
    if (dist.omega_atoms.empty() || dist.xi_atoms.empty())
      fail("environment: empty atom list");
    dist.omega_weights =
        j.contains("omega_weights")
            ? read_weights(j["omega_weights"], dist.omega_atoms.size(),
                           "environment.omega_weights")
            : std::vector<double>(dist.omega_atoms.size(),
                                  1.0 / static_cast<double>(dist.omega_atoms.size()));
    dist.xi_weights =
        j.contains("xi_weights")
            ? read_weights(j["xi_weights"], dist.xi_atoms.size(),
                           "environment.xi_weights")
            : std::vector<double>(dist.xi_atoms.size(),
                                  1.0 / static_cast<double>(dist.xi_atoms.size()));
  } else {
    fail("environment: unknown kind '" + kind + "'");
  }

  // kappa: explicit, else the smallest omega entry seen.
  if (j.contains("kappa")) {
    dist.kappa = j["kappa"].get<double>();
  } else {
    double m = 1.0;
    for (const auto& a : dist.atoms) m = std::min(m, min_row_entry(a.omega));
    for (const auto& w : dist.omega_atoms) m = std::min(m, min_row_entry(w));
    dist.kappa = m;
  }
  for (auto& a : dist.atoms) {
    a.omega.kappa = dist.kappa;
    a.xi.d = d;
  }
  for (auto& w : dist.omega_atoms) w.kappa = dist.kappa;
  for (auto& x : dist.xi_atoms) x.d = d;

  try {
    dist.validate();
  } catch (const std::exception& e) {
    fail(std::string("environment: ") + e.what());
  }
  return dist;
}

}  // namespace

uint64_t json_fnv_hash(const nlohmann::json& j) {
  const std::string s = j.dump();  // object keys serialize sorted
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

EnvDistribution preset_environment(const std::string& name) {
  const std::array<double, kMaxDim> e1{1.0, 0.0, 0.0, 0.0};
  if (name == "simple") {
    LocalEnv w = simple_walk_cell(2);
    return EnvDistribution::homogeneous_cell(w, proportional_cell(w, e1));
  }
  if (name == "two_atom_balanced") {
    LocalEnv a, b;
    a.d = b.d = 2;
    a.kappa = b.kappa = 0.15;
    a.p = {0.35, 0.35, 0.15, 0.15, 0, 0, 0, 0};
    b.p = {0.15, 0.15, 0.35, 0.35, 0, 0, 0, 0};
    return EnvDistribution::proportional({a, b}, {0.5, 0.5}, e1, 0.15);
  }
  if (name == "two_atom_wide") {
    // random yet wide floor: admits lambda up to 0.105
    LocalEnv a, b;
    a.d = b.d = 2;
    a.kappa = b.kappa = 0.21;
    a.p = {0.29, 0.29, 0.21, 0.21, 0, 0, 0, 0};
    b.p = {0.21, 0.21, 0.29, 0.29, 0, 0, 0, 0};
    return EnvDistribution::proportional({a, b}, {0.5, 0.5}, e1, 0.21);
  }
  if (name == "two_atom_drifted") {
    EnvDistribution dist;
    dist.kind = DistKind::finite_support;
    dist.d = 2;
    dist.kappa = 0.18;
    LocalEnv a, b;
    a.d = b.d = 2;
    a.kappa = b.kappa = dist.kappa;
    a.p = {0.40, 0.20, 0.20, 0.20, 0, 0, 0, 0};
    b.p = {0.30, 0.22, 0.30, 0.18, 0, 0, 0, 0};
    // drifted rows take explicit centered cells; proportional ones would not
    // sum to zero
    PerturbCell xa, xb;
    xa.d = xb.d = 2;
    xa.xi = {0.2, -0.2, 0.0, 0.0, 0, 0, 0, 0};
    xb.xi = {0.1, -0.1, 0.0, 0.0, 0, 0, 0, 0};
    dist.atoms = {SitePair{a, xa}, SitePair{b, xb}};
    dist.weights = {0.5, 0.5};
    dist.validate();
    return dist;
  }
  if (name == "independent_mix") {
    EnvDistribution dist;
    dist.kind = DistKind::independent_product;
    dist.d = 2;
    dist.kappa = 0.2;
    LocalEnv a, b;
    a.d = b.d = 2;
    a.kappa = b.kappa = 0.2;
    a.p = {0.30, 0.30, 0.20, 0.20, 0, 0, 0, 0};
    b.p = {0.20, 0.20, 0.30, 0.30, 0, 0, 0, 0};
    PerturbCell u, v;
    u.d = v.d = 2;
    u.xi = {0.5, -0.5, 0.0, 0.0, 0, 0, 0, 0};
    v.xi = {0.25, -0.25, 0.0, 0.0, 0, 0, 0, 0};
    dist.omega_atoms = {a, b};
    dist.omega_weights = {0.5, 0.5};
    dist.xi_atoms = {u, v};
    dist.xi_weights = {0.5, 0.5};
    dist.validate();
    return dist;
  }
  fail("environment: unknown preset '" + name + "'");
}

EnvDistribution parse_environment(const nlohmann::json& j) {
  if (j.is_string()) return preset_environment(j.get<std::string>());
  if (!j.is_object()) fail("environment: expected object or preset name");
  if (j.contains("preset")) {
    EnvDistribution dist = preset_environment(j["preset"].get<std::string>());
    if (j.contains("kappa")) {
      dist.kappa = j["kappa"].get<double>();
      for (auto& a : dist.atoms) a.omega.kappa = dist.kappa;
      for (auto& w : dist.omega_atoms) w.kappa = dist.kappa;
      try {
        dist.validate();
      } catch (const std::exception& e) {
        fail(std::string("environment: ") + e.what());
      }
    }
    return dist;
  }
  return explicit_environment(j);
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> kExperiments{
      "einstein", "regen", "kalikow", "harnack", "ballistic", "couple", "girsanov"};
  if (!j.is_object()) fail("config: expected a JSON object");
  ExperimentConfig cfg;
  cfg.raw_ = j;
  if (!j.contains("experiment") || !j["experiment"].is_string())
    fail("config: missing experiment name");
  cfg.experiment_ = j["experiment"].get<std::string>();
  if (!kExperiments.count(cfg.experiment_))
    fail("config: unknown experiment '" + cfg.experiment_ + "'");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      fail("config: seed must be an integer");
    cfg.seed_ = j["seed"].get<uint64_t>();
  }
  if (j.contains("threads")) {
    cfg.threads_ = j["threads"].get<int>();
    if (cfg.threads_ < 0) fail("config: threads must be >= 0");
  }
  cfg.out_dir_ = j.value("out", std::string("out"));
  if (j.contains("environment")) cfg.environment();  // validate early
  return cfg;
}

void ExperimentConfig::override_seed(uint64_t s) {
  seed_ = s;
  raw_["seed"] = s;
}

bool ExperimentConfig::has(const std::string& key) const { return raw_.contains(key); }

double ExperimentConfig::num(const std::string& key, double def) const {
  if (!raw_.contains(key)) return def;
  if (!raw_[key].is_number()) fail("config: " + key + " must be numeric");
  return raw_[key].get<double>();
}

size_t ExperimentConfig::uint(const std::string& key, size_t def) const {
  if (!raw_.contains(key)) return def;
  if (!raw_[key].is_number() || raw_[key].get<double>() < 0)
    fail("config: " + key + " must be a nonnegative integer");
  return raw_[key].get<size_t>();
}

int ExperimentConfig::integer(const std::string& key, int def) const {
  if (!raw_.contains(key)) return def;
  if (!raw_[key].is_number_integer() && !raw_[key].is_number_unsigned())
    fail("config: " + key + " must be an integer");
  return raw_[key].get<int>();
}

bool ExperimentConfig::flag(const std::string& key, bool def) const {
  if (!raw_.contains(key)) return def;
  if (!raw_[key].is_boolean()) fail("config: " + key + " must be boolean");
  return raw_[key].get<bool>();
}

std::string ExperimentConfig::str(const std::string& key, const std::string& def) const {
  if (!raw_.contains(key)) return def;
  if (!raw_[key].is_string()) fail("config: " + key + " must be a string");
  return raw_[key].get<std::string>();
}

std::vector<double> ExperimentConfig::num_list(const std::string& key,
                                               std::vector<double> def) const {
  if (!raw_.contains(key)) return def;
  if (!raw_[key].is_array()) fail("config: " + key + " must be an array");
  std::vector<double> out;
  for (const auto& v : raw_[key]) {
    if (!v.is_number()) fail("config: " + key + " has non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

EnvDistribution ExperimentConfig::environment() const {
  if (!raw_.contains("environment")) fail("config: missing environment");
  return parse_environment(raw_["environment"]);
}

bool ExperimentConfig::has_environment() const { return raw_.contains("environment"); }

}  // namespace rwre

#pragma once

// JSON experiment configuration: one document per run, canonically hashed so
// reports can be tied back to the exact inputs. Environment distributions are
// either spelled out or named presets.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwre/lattice.hpp"

namespace rwre {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a over the canonical (sorted-key) serialization.
uint64_t json_fnv_hash(const nlohmann::json& j);

// Environment from a JSON spec: either {"preset": "..."} (with optional
// overrides) or an explicit {"kind": ...} document.
EnvDistribution parse_environment(const nlohmann::json& j);

// Named distributions used by the shipped configs and tests.
EnvDistribution preset_environment(const std::string& name);

class ExperimentConfig {
 public:
  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_json(const nlohmann::json& j);

  const std::string& experiment() const { return experiment_; }
  uint64_t seed() const { return seed_; }
  void override_seed(uint64_t s);
  int threads() const { return threads_; }  // 0 = unset
  const std::string& out_dir() const { return out_dir_; }

  bool has(const std::string& key) const;
  double num(const std::string& key, double def) const;
  size_t uint(const std::string& key, size_t def) const;
  int integer(const std::string& key, int def) const;
  bool flag(const std::string& key, bool def) const;
  std::string str(const std::string& key, const std::string& def) const;
  std::vector<double> num_list(const std::string& key,
                               std::vector<double> def) const;

  EnvDistribution environment() const;  // throws ConfigError if absent/invalid
  bool has_environment() const;

  uint64_t hash() const { return json_fnv_hash(raw_); }
  const nlohmann::json& raw() const { return raw_; }

 private:
  nlohmann::json raw_;
  std::string experiment_;
  uint64_t seed_ = 1;
  int threads_ = 0;
  std::string out_dir_ = "out";
};

}  // namespace rwre

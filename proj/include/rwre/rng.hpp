#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace rwre {

// Counter-based keyed randomness.  Every draw is a pure function of
// (key, counter), so parallel consumers can never perturb each other's
// streams and any draw can be replayed from its coordinates alone.

// 64-bit finalizer (splitmix64); bijective with full avalanche.
inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Order-sensitive fold of one word into a running key.
inline uint64_t key_fold(uint64_t h, uint64_t w) {
  return mix64(h + kGolden + w);
}

// Derive a stream key from a list of words (seed, ids, coordinates...).
inline uint64_t derive_key(std::initializer_list<uint64_t> words) {
  uint64_t h = 0x8c6e1d23a94bf705ULL;
  for (uint64_t w : words) h = key_fold(h, w);
  return h;
}

// Value of stream `key` at position `ctr`.
inline uint64_t at(uint64_t key, uint64_t ctr) {
  return mix64(key + ctr * kGolden);
}

inline double to_unit(uint64_t bits) {
  // 53 random bits into [0,1).
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform_at(uint64_t key, uint64_t ctr) { return to_unit(at(key, ctr)); }

// Sequential view of a keyed stream.  Holds (key, position); copies are
// independent replays.  Position-keyed: value i never depends on how many
// draws other holders of the same key made.
class Stream {
 public:
  Stream() : key_(0), ctr_(0) {}
  explicit Stream(uint64_t key) : key_(key), ctr_(0) {}
  Stream(std::initializer_list<uint64_t> words) : key_(derive_key(words)), ctr_(0) {}

  uint64_t next_bits() { return at(key_, ctr_++); }
  double next_unit() { return to_unit(next_bits()); }

  // Bernoulli(p) as {0,1}.
  int bernoulli(double p) { return next_unit() < p ? 1 : 0; }

  // Index in [0,n) proportional to w[0..n); weights need not be normalized.
  int categorical(const double* w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    double u = next_unit() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  uint64_t key() const { return key_; }
  uint64_t position() const { return ctr_; }
  void seek(uint64_t ctr) { ctr_ = ctr; }

  // Independent child stream; deterministic in (key, tag).
  Stream child(uint64_t tag) const { return Stream(derive_key({key_, tag})); }

 private:
  uint64_t key_;
  uint64_t ctr_;
};

// Stream roles used by the keyed hierarchy (experiment -> replica -> role).
enum class Role : uint64_t {
  site_omega = 1,   // environment cell choice at a lattice site
  site_xi = 2,      // independent perturbation choice at a lattice site
  walk = 3,         // walker step decisions
  coin = 4,         // per-level construction coins
  data = 5,         // auxiliary data draws (boundary data, shuffles)
  bootstrap = 6,    // resampling indices
};

inline uint64_t role_key(uint64_t parent, Role r) {
  return derive_key({parent, static_cast<uint64_t>(r)});
}

}  // namespace rwre

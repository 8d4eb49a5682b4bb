#pragma once

#include <cstdint>
#include <string_view>

namespace monfap {

// Deterministic xoshiro256++ generator with splitmix64 seeding. Hand-rolled so
// that draws are bit-stable across platforms and standard-library versions;
// every stochastic component derives its own stream so toggling one consumer
// does not shift the others.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // uniform in [0,1)
  double uniform();
  double uniform(double lo, double hi);
  // integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi);
  // standard normal via Box-Muller (one spare cached)
  double normal();
  double normal(double mean, double stddev);
  bool bernoulli(double p);

  // Independent child stream identified by a label.
  Rng derive(std::string_view tag) const;
  Rng derive(std::uint64_t salt) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  double spare_ = 0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_tag(std::string_view tag);

}  // namespace monfap

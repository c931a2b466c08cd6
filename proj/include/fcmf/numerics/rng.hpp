#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

namespace fcmf::num {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(const std::string& text);

// mt19937_64 plus distribution code that is ours, so draws are identical on
// every standard library (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void set_state(const std::string& state);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// One master seed, independent named streams derived from it.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t master_seed = 0) : master_(master_seed) {}

  Rng& stream(const std::string& name);
  std::uint64_t master_seed() const { return master_; }

  std::map<std::string, std::string> states() const;
  void restore(const std::map<std::string, std::string>& states);

 private:
  std::uint64_t master_;
  std::map<std::string, Rng> streams_;
};

}  // namespace fcmf::num

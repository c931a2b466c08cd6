#include "fcmf/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fcmf/errors.hpp"

namespace fcmf::num {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::below(0)");
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw DataError("corrupt RNG state");
}

Rng& RngStreams::stream(const std::string& name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) {
    it = streams_.emplace(name, Rng(splitmix64(master_ ^ fnv1a64(name)))).first;
  }
  return it->second;
}

std::map<std::string, std::string> RngStreams::states() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, rng] : streams_) out[name] = rng.state();
  return out;
}

void RngStreams::restore(const std::map<std::string, std::string>& states) {
  for (const auto& [name, state] : states) stream(name).set_state(state);
}

}  // namespace fcmf::num

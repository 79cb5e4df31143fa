#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace bridgecat {

/// Deterministic random stream. Normal draws use an explicit Box-Muller
/// transform (no cached state), so the draw sequence is a pure function of
/// the seed and serializes cleanly into checkpoints.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive; rejection-free modulo bias is
  /// negligible for the ranges used here (< 2^32).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 step; used to derive independent per-task seeds from a base
/// seed so parallel work is reproducible regardless of scheduling order.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

} // namespace bridgecat

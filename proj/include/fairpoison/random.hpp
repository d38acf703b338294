#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>

namespace fairpoison {

/// Seedable generator whose output sequence is identical on every platform.
///
/// std::mt19937_64 is bit-specified by the standard, but the standard
/// distributions are not, so all variates are derived here from raw engine
/// output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double Uniform();

  /// Standard normal variate (Box-Muller, second value cached).
  double Normal();

  bool Bernoulli(double p) { return Uniform() < p; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t Index(std::size_t n);

  /// Fisher-Yates shuffle.
  void Shuffle(std::span<std::size_t> values);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// Derives an independent stream seed from (seed, stream) via splitmix64.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fairpoison

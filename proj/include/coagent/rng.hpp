#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace coagent {

/// 64-bit Mersenne Twister with portable uniform draws.
///
/// The standard distributions are implementation-defined, so the draws
/// used by environments and policies are built directly on the raw
/// engine output. That keeps result files identical across standard
/// libraries, not just across runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Seeds from a (seed, trial, stream) triple through std::seed_seq.
  Rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn from a probability vector (assumed normalized).
  std::size_t categorical(std::span<const double> probs);

  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Independent streams owned by one trial.
enum class Stream : std::uint64_t { kEnvironment = 1, kPolicy = 2, kExecution = 3, kInit = 4 };

}  // namespace coagent

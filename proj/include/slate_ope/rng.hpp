#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace slate_ope {

/// Named purposes for derived random streams. Every stream in an experiment
/// is keyed by (root seed, purpose, tensor index, replication index), so
/// streams never overlap and any unit of work can be replayed alone.
enum class StreamPurpose : std::uint64_t {
  cardinalities = 1,
  model = 2,
  data = 3,
  auxiliary = 4,
};

/// Mixes a root seed and a stream key into an independent 64-bit seed
/// (SplitMix64 finalizer applied along the key chain).
std::uint64_t derive_seed(std::uint64_t root, StreamPurpose purpose,
                          std::uint64_t major = 0, std::uint64_t minor = 0);

/// A single random stream. Satisfies UniformRandomBitGenerator so it can be
/// handed to standard distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), unbiased (multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal(double mean, double sd) { return mean + sd * gaussian_(engine_); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> gaussian_{0.0, 1.0};
};

}  // namespace slate_ope

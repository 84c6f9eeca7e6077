#pragma once

#include <cstdint>
#include <random>

namespace gbpa {

/// SplitMix64 finalizer. Used as the seed hash for deriving substreams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the i-th run of an experiment: master XOR hash(i).
constexpr std::uint64_t seed_for_index(std::uint64_t master,
                                       std::uint64_t index) noexcept {
  return master ^ mix64(index);
}

/// Named substreams of a single run. Each stream is an independent
/// generator whose seed is derived from the run seed and the stream id.
enum class Stream : std::uint64_t {
  kSampling = 1,
  kResampling = 2,
  kEnvironment = 3,
  kLedger = 4,
  kProbe = 5,
};

constexpr std::uint64_t substream_seed(std::uint64_t seed, Stream s) noexcept {
  return mix64(seed ^ mix64(0x5eed0000ULL + static_cast<std::uint64_t>(s)));
}

/// 64-bit generator with an explicit seed. Value type; copy to fork.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}
  Rng(std::uint64_t seed, Stream s) : Rng(substream_seed(seed, s)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0,1): 53 random bits, offset by half a ulp.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gbpa

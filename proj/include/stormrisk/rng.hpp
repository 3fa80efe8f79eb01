#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace stormrisk {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A (seed, stream) pair selects an independent substream; the output is a pure
/// function of (seed, stream, position), so replicates can be generated in any
/// order or in parallel and still reproduce bit-for-bit.
class CounterRng {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) {
      buffer_ = philox({static_cast<std::uint32_t>(position_), static_cast<std::uint32_t>(position_ >> 32),
                        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                       key_);
      ++position_;
      lane_ = 0;
    }
    return buffer_[lane_++];
  }

  /// Uniform double on the open interval (0, 1), 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;
    const std::uint64_t lo = (*this)() >> 6;
    const double u = (static_cast<double>(hi) * 67108864.0 + static_cast<double>(lo)) *
                     (1.0 / 9007199254740992.0);
    return u > 0.0 ? u : 0.5 / 9007199254740992.0;
  }

  /// Generator for a sibling substream under the same seed.
  [[nodiscard]] CounterRng substream(std::uint64_t stream) const {
    CounterRng out;
    out.key_ = key_;
    out.stream_ = stream;
    return out;
  }

  [[nodiscard]] std::uint64_t stream() const { return stream_; }

  /// Raw Philox4x32 bijection with 10 rounds.
  static Block philox(Block ctr, Key key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53U;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  Key key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t position_ = 0;
  Block buffer_{};
  int lane_ = 4;
};

// Thin wrappers over Boost.Random so no distribution object state leaks between
// calls; Boost's algorithms are fixed across platforms, unlike <random>'s.
double standard_normal(CounterRng& rng);
std::uint64_t poisson(CounterRng& rng, double mean);

}  // namespace stormrisk

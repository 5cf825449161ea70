#pragma once

#include <array>
#include <cstdint>

namespace cpinn {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// A block is a pure function of (counter, key), so any draw can be
/// reproduced from its coordinates without replaying the stream.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key);
};

/// Sequential uniform draws over one Philox stream.
///
/// The 128-bit counter is laid out as (index_lo, index_hi, substream, stream);
/// the 64-bit seed is the key. Distinct (stream, substream) pairs never share
/// a counter value.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint32_t substream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n) by rejection, n > 0.
  std::uint32_t below(std::uint32_t n);

 private:
  void refill();

  Philox4x32::Key key_{};
  std::uint32_t stream_;
  std::uint32_t substream_;
  std::uint64_t index_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

}  // namespace cpinn

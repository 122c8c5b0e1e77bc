#pragma once

// Philox4x64-10 counter-based generator (Salmon et al., Random123).
//
// Every output block is a pure function of (key, counter), so a draw can be
// addressed directly as (seed, stream, index) with no hidden state. That is
// what makes campaigns replayable and lets Monte Carlo work be split across
// workers without changing the result.

#include <array>
#include <cstdint>
#include <string_view>

namespace corpstat {

class Philox4x64 {
 public:
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static constexpr int kRounds = 10;

  static Counter block(Counter counter, Key key) noexcept;
};

// Uniform 53-bit double in [0, 1) from a 64-bit word.
inline double to_unit_double(std::uint64_t word) noexcept {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

// Sequential view over a Philox stream keyed by (seed, stream id). The
// counter's first word advances by one per block of four outputs; the
// remaining words are caller-chosen coordinates.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream_id,
               std::uint64_t coordinate = 0) noexcept
      : key_{seed, stream_id}, counter_{0, coordinate, 0, 0} {}

  std::uint64_t next() noexcept;
  double uniform() noexcept { return to_unit_double(next()); }

  // Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t blocks_consumed() const noexcept { return counter_[0]; }

 private:
  Philox4x64::Key key_;
  Philox4x64::Counter counter_;
  Philox4x64::Counter buffer_{};
  int buffered_ = 0;
};

// Stable 64-bit stream identifier for a label (FNV-1a of the bytes).
std::uint64_t stream_id(std::string_view label) noexcept;

// Fresh seed from the OS entropy source, for callers that were given none.
// Record it: everything downstream is replayable from the seed.
std::uint64_t generate_seed();

}  // namespace corpstat

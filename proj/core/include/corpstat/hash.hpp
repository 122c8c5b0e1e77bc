#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace corpstat {

// FNV-1a, 64-bit. Portable and stable across platforms; not cryptographic.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a64& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= kPrime;
    }
    return *this;
  }

  // Little-endian byte order regardless of host.
  Fnv1a64& update(std::uint64_t word) noexcept {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (word >> (8 * i)) & 0xffU;
      state_ *= kPrime;
    }
    return *this;
  }

  Fnv1a64& update(double value) noexcept {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof bits);
    return update(bits);
  }

  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffsetBasis;
};

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  return Fnv1a64{}.update(bytes).value();
}

std::string to_hex(std::uint64_t value);

}  // namespace corpstat

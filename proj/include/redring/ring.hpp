#pragma once

#include <cstdint>
#include <string>

namespace redring {

inline constexpr int kMaxRingBits = 64;

// Low `width` bits set; width 64 is all ones.
constexpr std::uint64_t ring_mask(int width) noexcept {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

// Two's-complement interpretation of the low `width` bits of `v`.
constexpr std::int64_t to_signed(std::uint64_t v, int width) noexcept {
  if (width >= 64) return static_cast<std::int64_t>(v);
  const std::uint64_t sign = std::uint64_t{1} << (width - 1);
  v &= ring_mask(width);
  return static_cast<std::int64_t>((v ^ sign) - sign);
}

/// An element of Z/2^width, always stored reduced.
class RingElement {
 public:
  constexpr RingElement() = default;
  RingElement(std::uint64_t value, int width);

  static RingElement from_signed(std::int64_t value, int width);

  constexpr std::uint64_t value() const noexcept { return value_; }
  constexpr int width() const noexcept { return width_; }
  constexpr std::int64_t signed_value() const noexcept { return to_signed(value_, width_); }

  friend constexpr bool operator==(const RingElement&, const RingElement&) = default;

 private:
  std::uint64_t value_ = 0;
  int width_ = kMaxRingBits;
};

struct FixedPointConfig {
  int ring_bits = 64;
  int frac_bits = 16;

  void validate() const;
  double scale() const;  // D = 2^frac_bits
};

/// Bits m..k-1 of a share. k is exclusive, m inclusive.
struct BitWindow {
  int k = kMaxRingBits;
  int m = 0;

  constexpr int width() const noexcept { return k - m; }
  static constexpr BitWindow full(int ring_bits) noexcept { return {ring_bits, 0}; }

  // Throws RangeError unless 0 <= m < k <= ring_bits and k - m >= 2.
  void validate(int ring_bits) const;
  std::string to_string() const;

  friend constexpr bool operator==(const BitWindow&, const BitWindow&) = default;
};

// Raw-word slice used by the tensor kernels; no validation.
constexpr std::uint64_t slice_word(std::uint64_t v, BitWindow w) noexcept {
  return (v >> w.m) & ring_mask(w.k - w.m);
}

// round-half-away-from-zero(D * x) on a width-N ring. Throws EncodeRangeError
// when |x| * D >= 2^(N-1) or x is not finite.
RingElement encode_fixed(double x, const FixedPointConfig& cfg);
std::uint64_t encode_fixed_word(double x, const FixedPointConfig& cfg);

double decode_fixed(RingElement e, const FixedPointConfig& cfg);
double decode_fixed_word(std::uint64_t v, const FixedPointConfig& cfg);

RingElement slice_bits(RingElement e, BitWindow w);

constexpr int sign_bit(RingElement e) noexcept {
  return static_cast<int>((e.value() >> (e.width() - 1)) & 1U);
}

}  // namespace redring

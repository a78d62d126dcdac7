#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "redring/errors.hpp"
#include "redring/ring.hpp"

using namespace redring;

namespace {
const FixedPointConfig kFp{64, 16};
}

TEST_CASE("encode_fixed known values") {
  CHECK(encode_fixed(0.0, kFp).value() == 0);
  CHECK(encode_fixed(1.5, kFp).value() == 98304);
  // -0.0001 * 2^16 = -6.5536..., rounded (checked with mpmath) to -7.
  const RingElement e = encode_fixed(-0.0001, kFp);
  CHECK(e.signed_value() == -7);
  CHECK(std::fabs(decode_fixed(e, kFp) - (-0.0001)) <= std::ldexp(1.0, -17));
}

TEST_CASE("encode_fixed rounds ties away from zero") {
  CHECK(encode_fixed(std::ldexp(0.5, -16), kFp).signed_value() == 1);
  CHECK(encode_fixed(std::ldexp(-0.5, -16), kFp).signed_value() == -1);
  CHECK(encode_fixed(std::ldexp(2.5, -16), kFp).signed_value() == 3);
}

TEST_CASE("encode_fixed overflow is an error") {
  CHECK_THROWS_AS(encode_fixed(std::ldexp(1.0, 47), kFp), EncodeRangeError);
  CHECK_THROWS_AS(encode_fixed(-std::ldexp(1.0, 47), kFp), EncodeRangeError);
  CHECK_THROWS_AS(encode_fixed(std::numeric_limits<double>::quiet_NaN(), kFp), EncodeRangeError);
  CHECK_NOTHROW(encode_fixed(std::ldexp(1.0, 46), kFp));
  const FixedPointConfig small{10, 4};
  CHECK_THROWS_AS(encode_fixed(32.0, small), EncodeRangeError);
  CHECK(encode_fixed(-31.0, small).signed_value() == -496);
}

TEST_CASE("decode_fixed") {
  CHECK(decode_fixed(RingElement(98304, 64), kFp) == 1.5);
  CHECK(decode_fixed(RingElement(0ULL - (1ULL << 16), 64), kFp) == -1.0);
  CHECK_THROWS_AS(decode_fixed(RingElement(1, 32), kFp), RangeError);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    // Keep |v| well inside the encodable range.
    const RingElement v = RingElement::from_signed(static_cast<std::int64_t>(rng()) >> 20, 64);
    const double d = decode_fixed(v, kFp);
    REQUIRE(decode_fixed(encode_fixed(d, kFp), kFp) == d);
    REQUIRE(encode_fixed(d, kFp) == v);
  }
}

TEST_CASE("encode_fixed is monotone") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    double a = dist(rng), b = dist(rng);
    if (a > b) std::swap(a, b);
    REQUIRE(encode_fixed(a, kFp).signed_value() <= encode_fixed(b, kFp).signed_value());
  }
}

TEST_CASE("slice_bits examples") {
  const RingElement x(0b11011101, 8);
  const RingElement s = slice_bits(x, {5, 1});
  CHECK(s.value() == 0b1110);
  CHECK(s.width() == 4);

  const RingElement a = slice_bits(RingElement(47, 8), {5, 2});
  CHECK(a.value() == 3);
  CHECK(a.width() == 3);
  const RingElement b = slice_bits(RingElement::from_signed(-38, 8), {5, 2});
  CHECK(b.value() == 0b110);
  CHECK(b.signed_value() == -2);

  for (std::uint64_t v = 0; v < 256; ++v) {
    CHECK(slice_bits(RingElement(v, 8), {8, 0}) == RingElement(v, 8));
  }
  CHECK_THROWS_AS((slice_bits(x, {9, 1})), RangeError);
  CHECK_THROWS_AS((slice_bits(x, {3, 3})), RangeError);
}

TEST_CASE("slice_bits equals floor division mod 2^(k-m), exhaustive width 8") {
  for (int k = 1; k <= 8; ++k) {
    for (int m = 0; m < k; ++m) {
      for (std::uint64_t v = 0; v < 256; ++v) {
        const auto s = slice_bits(RingElement(v, 8), {k, m});
        REQUIRE(s.value() == (v / (1ULL << m)) % (1ULL << (k - m)));
      }
    }
  }
}

TEST_CASE("low-bit slice is a ring homomorphism") {
  for (int k = 1; k <= 8; ++k) {
    for (std::uint64_t a = 0; a < 256; ++a) {
      for (std::uint64_t b = 0; b < 256; ++b) {
        const auto lhs = slice_bits(RingElement(a + b, 8), {k, 0});
        const auto rhs = (slice_bits(RingElement(a, 8), {k, 0}).value() +
                          slice_bits(RingElement(b, 8), {k, 0}).value()) & ring_mask(k);
        REQUIRE(lhs.value() == rhs);
      }
    }
  }
}

TEST_CASE("sign_bit") {
  for (int w = 1; w <= 64; ++w) {
    CHECK(sign_bit(RingElement(0, w)) == 0);
    CHECK(sign_bit(RingElement::from_signed(-1, w)) == 1);
    CHECK(sign_bit(RingElement(ring_mask(w) >> 1, w)) == 0);
  }
}

TEST_CASE("BitWindow validation") {
  CHECK_NOTHROW((BitWindow{64, 0}.validate(64)));
  CHECK_NOTHROW((BitWindow{5, 3}.validate(8)));
  CHECK_THROWS_AS((BitWindow{5, 4}.validate(8)), RangeError);
  CHECK_THROWS_AS((BitWindow{9, 0}.validate(8)), RangeError);
  CHECK_THROWS_AS((BitWindow{3, 5}.validate(8)), RangeError);
  CHECK_THROWS_AS((BitWindow{4, -1}.validate(8)), RangeError);
}

TEST_CASE("FixedPointConfig validation") {
  CHECK_NOTHROW(FixedPointConfig{}.validate());
  CHECK_THROWS_AS((FixedPointConfig{64, 0}).validate(), ConfigError);
  CHECK_THROWS_AS((FixedPointConfig{16, 16}).validate(), ConfigError);
  CHECK_THROWS_AS((FixedPointConfig{65, 16}).validate(), RangeError);
}

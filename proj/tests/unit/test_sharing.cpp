#include <random>

#include "doctest.h"
#include "redring/errors.hpp"
#include "redring/sharing.hpp"

using namespace redring;

TEST_CASE("arith shares of the worked example") {
  const ArithShareTensor s0(0, 8, {1}, {47});
  const ArithShareTensor s1(1, 8, {1}, {RingElement::from_signed(-38, 8).value()});
  CHECK(reconstruct_arith(s0, s1).data[0] == 9);

  const auto r0 = slice_shares(s0, {5, 2});
  const auto r1 = slice_shares(s1, {5, 2});
  CHECK(r0.width == 3);
  CHECK(r0.data[0] == 3);
  CHECK(to_signed(r1.data[0], 3) == -2);
  CHECK(reconstruct_arith(r0, r1).data[0] == 1);
}

TEST_CASE("share_arith roundtrip and split form") {
  Prng rng(1);
  std::mt19937_64 src(2);
  for (int width : {1, 8, 13, 32, 64}) {
    RingTensor secret(width, {10000});
    for (auto& v : secret.data) v = src() & ring_mask(width);
    auto [s0, s1] = share_arith(secret, rng);
    CHECK(s0.party == 0);
    CHECK(s1.party == 1);
    CHECK(reconstruct_arith(s0, s1) == secret);
    CHECK(reconstruct_arith(s1, s0) == secret);
  }
  // Same seed, same split.
  RingTensor secret(8, {4}, {9, 0, 255, 128});
  Prng a(5), b(5);
  CHECK(share_arith(secret, a) == share_arith(secret, b));
}

TEST_CASE("zero shares reconstruct to zero") {
  const ArithShareTensor z0(0, 16, {3}), z1(1, 16, {3});
  CHECK(reconstruct_arith(z0, z1) == RingTensor(16, {3}));
}

TEST_CASE("binary shares") {
  Prng rng(3);
  RingTensor secret(8, {256});
  for (std::uint64_t v = 0; v < 256; ++v) secret.data[v] = v;
  auto [b0, b1] = share_binary(secret, rng);
  CHECK(reconstruct_binary(b0, b1) == secret);
  const BinShareTensor same0(0, 8, {1}, {0xa5}), same1(1, 8, {1}, {0xa5});
  CHECK(reconstruct_binary(same0, same1).data[0] == 0);
  const BinShareTensor zero1(1, 8, {1}, {0});
  CHECK(reconstruct_binary(same0, zero1).data[0] == 0xa5);
}

TEST_CASE("reconstruction errors") {
  const ArithShareTensor a(0, 8, {2}), b(1, 8, {3}), c(1, 16, {2}), d(0, 8, {2});
  CHECK_THROWS_AS(reconstruct_arith(a, b), ShapeError);
  CHECK_THROWS_AS(reconstruct_arith(a, c), ShapeError);
  CHECK_THROWS_AS(reconstruct_arith(a, d), ShapeError);
  CHECK_THROWS_AS(ArithShareTensor(0, 8, {2, 2}, {1, 2, 3}), ShapeError);
}

TEST_CASE("local algebra is a homomorphism, exhaustive width 8") {
  for (std::uint64_t x = 0; x < 256; ++x) {
    for (std::uint64_t r = 0; r < 256; ++r) {
      const ArithShareTensor x0(0, 8, {1}, {(x + r) & 0xff}), x1(1, 8, {1}, {(0 - r) & 0xff});
      const ArithShareTensor y0(0, 8, {1}, {(r * 7) & 0xff}), y1(1, 8, {1}, {(x * 3 - r * 7) & 0xff});
      const std::uint64_t y = (x * 3) & 0xff;
      REQUIRE(reconstruct_arith(add_shares(x0, y0), add_shares(x1, y1)).data[0] == ((x + y) & 0xff));
      REQUIRE(reconstruct_arith(sub_shares(x0, y0), sub_shares(x1, y1)).data[0] == ((x - y) & 0xff));
      REQUIRE(reconstruct_arith(add_public(x0, r), add_public(x1, r)).data[0] == ((x + r) & 0xff));
      REQUIRE(reconstruct_arith(mul_public(x0, r), mul_public(x1, r)).data[0] == ((x * r) & 0xff));
    }
  }
}

TEST_CASE("mul_public by one and x + (-x)") {
  Prng rng(4);
  RingTensor secret(64, {100});
  for (std::size_t i = 0; i < 100; ++i) secret.data[i] = i * 0x9e3779b97f4a7c15ULL;
  auto [s0, s1] = share_arith(secret, rng);
  CHECK(mul_public(s0, 1) == s0);
  RingTensor neg(64, {100});
  for (std::size_t i = 0; i < 100; ++i) neg.data[i] = 0 - secret.data[i];
  auto [n0, n1] = share_arith(neg, rng);
  CHECK(reconstruct_arith(add_shares(s0, n0), add_shares(s1, n1)) == RingTensor(64, {100}));
}

TEST_CASE("add_public with a tensor lands on party 0 only") {
  const ArithShareTensor s0(0, 8, {2}, {1, 2}), s1(1, 8, {2}, {3, 4});
  const RingTensor c(8, {2}, {10, 20});
  CHECK(add_public(s1, c) == s1);
  CHECK(reconstruct_arith(add_public(s0, c), add_public(s1, c)).data == std::vector<std::uint64_t>{14, 26});
}

TEST_CASE("slice_shares borrow is at most one, exhaustive width 8") {
  for (int k = 2; k <= 8; ++k) {
    for (int m = 0; m <= k - 2; ++m) {
      const BitWindow w{k, m};
      const std::uint64_t mask = ring_mask(k - m);
      for (std::uint64_t x = 0; x < 256; ++x) {
        const std::uint64_t fl = (x >> m) & mask;
        for (std::uint64_t r = 0; r < 256; ++r) {
          const ArithShareTensor x0(0, 8, {1}, {(x + r) & 0xff}), x1(1, 8, {1}, {(0 - r) & 0xff});
          const std::uint64_t got =
              reconstruct_arith(slice_shares(x0, w), slice_shares(x1, w)).data[0];
          if (m == 0) {
            REQUIRE(got == fl);
          } else {
            REQUIRE((got == fl || got == ((fl - 1) & mask)));
          }
        }
      }
    }
  }
}

TEST_CASE("slice_shares window errors") {
  const ArithShareTensor s(0, 8, {1});
  CHECK_THROWS_AS((slice_shares(s, {9, 0})), RangeError);
  CHECK_THROWS_AS((slice_shares(s, {4, 4})), RangeError);
  CHECK(slice_shares(s, {4, 3}).width == 1);
}

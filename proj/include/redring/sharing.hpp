#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "redring/prng.hpp"
#include "redring/ring.hpp"

namespace redring {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Plain (public or reconstructed) tensor of width-`width` ring words.
struct RingTensor {
  int width = kMaxRingBits;
  Shape shape;
  std::vector<std::uint64_t> data;

  RingTensor() = default;
  RingTensor(int width, Shape shape);
  RingTensor(int width, Shape shape, std::vector<std::uint64_t> words);

  static RingTensor from_signed(std::span<const std::int64_t> values, int width, Shape shape);

  std::size_t size() const noexcept { return data.size(); }
  RingElement at(std::size_t i) const { return RingElement(data[i], width); }
  std::int64_t signed_at(std::size_t i) const { return to_signed(data[i], width); }

  friend bool operator==(const RingTensor&, const RingTensor&) = default;
};

struct ArithTag {};
struct BinTag {};

/// One party's share of a tensor. Arithmetic shares add mod 2^width, binary
/// shares XOR. The kind is part of the type so the two cannot be mixed.
template <typename Kind>
struct ShareTensor {
  int party = 0;
  int width = kMaxRingBits;
  Shape shape;
  std::vector<std::uint64_t> data;

  ShareTensor() = default;
  ShareTensor(int party, int width, Shape shape)
      : party(party), width(width), shape(std::move(shape)), data(numel(this->shape), 0) {}
  ShareTensor(int party, int width, Shape shape, std::vector<std::uint64_t> words);

  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const ShareTensor&, const ShareTensor&) = default;
};

using ArithShareTensor = ShareTensor<ArithTag>;
using BinShareTensor = ShareTensor<BinTag>;

extern template struct ShareTensor<ArithTag>;
extern template struct ShareTensor<BinTag>;

// <x>_0 = x + r, <x>_1 = -r with one fresh r per element drawn from rng.
std::pair<ArithShareTensor, ArithShareTensor> share_arith(const RingTensor& secret, Prng& rng);
RingTensor reconstruct_arith(const ArithShareTensor& s0, const ArithShareTensor& s1);

// <x>_0 = x ^ r, <x>_1 = r.
std::pair<BinShareTensor, BinShareTensor> share_binary(const RingTensor& secret, Prng& rng);
RingTensor reconstruct_binary(const BinShareTensor& s0, const BinShareTensor& s1);

ArithShareTensor add_shares(const ArithShareTensor& a, const ArithShareTensor& b);
ArithShareTensor sub_shares(const ArithShareTensor& a, const ArithShareTensor& b);
// Public constants land on party 0 only.
ArithShareTensor add_public(const ArithShareTensor& s, std::uint64_t c);
ArithShareTensor add_public(const ArithShareTensor& s, const RingTensor& c);
ArithShareTensor mul_public(const ArithShareTensor& s, std::uint64_t a);

BinShareTensor xor_shares(const BinShareTensor& a, const BinShareTensor& b);

/// Keeps bits m..k-1 of every share locally. The reconstruction on the small
/// ring is floor(x / 2^m) or floor(x / 2^m) - 1 (mod 2^(k-m)).
ArithShareTensor slice_shares(const ArithShareTensor& s, BitWindow w);

}  // namespace redring

#include "redring/sharing.hpp"

#include <functional>
#include <numeric>
#include <sstream>

#include "redring/errors.hpp"

namespace redring {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_words(int width, const Shape& shape, std::size_t words) {
  if (width < 1 || width > kMaxRingBits) {
    throw RangeError("tensor width " + std::to_string(width) + " outside 1..64");
  }
  if (numel(shape) != words) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " + std::to_string(words) +
                     " elements");
  }
}

template <typename A, typename B>
void check_compatible(const A& a, const B& b) {
  if (a.width != b.width) {
    throw ShapeError("width mismatch: " + std::to_string(a.width) + " vs " +
                     std::to_string(b.width));
  }
  if (a.shape != b.shape) {
    throw ShapeError("shape mismatch: " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
}

template <typename Kind>
void check_pair(const ShareTensor<Kind>& s0, const ShareTensor<Kind>& s1) {
  check_compatible(s0, s1);
  if (s0.party == s1.party) throw ShapeError("reconstruction needs one share from each party");
}

}  // namespace

RingTensor::RingTensor(int width, Shape shape)
    : width(width), shape(std::move(shape)), data(numel(this->shape), 0) {
  check_words(width, this->shape, data.size());
}

RingTensor::RingTensor(int width, Shape shape, std::vector<std::uint64_t> words)
    : width(width), shape(std::move(shape)), data(std::move(words)) {
  check_words(width, this->shape, data.size());
  const std::uint64_t mask = ring_mask(width);
  for (auto& w : data) w &= mask;
}

RingTensor RingTensor::from_signed(std::span<const std::int64_t> values, int width, Shape shape) {
  std::vector<std::uint64_t> words(values.begin(), values.end());
  return RingTensor(width, std::move(shape), std::move(words));
}

template <typename Kind>
ShareTensor<Kind>::ShareTensor(int party, int width, Shape shape, std::vector<std::uint64_t> words)
    : party(party), width(width), shape(std::move(shape)), data(std::move(words)) {
  check_words(width, this->shape, data.size());
  const std::uint64_t mask = ring_mask(width);
  for (auto& w : data) w &= mask;
}

template struct ShareTensor<ArithTag>;
template struct ShareTensor<BinTag>;

std::pair<ArithShareTensor, ArithShareTensor> share_arith(const RingTensor& secret, Prng& rng) {
  const std::uint64_t mask = ring_mask(secret.width);
  ArithShareTensor s0(0, secret.width, secret.shape);
  ArithShareTensor s1(1, secret.width, secret.shape);
  for (std::size_t i = 0; i < secret.size(); ++i) {
    const std::uint64_t r = rng.next_u64() & mask;
    s0.data[i] = (secret.data[i] + r) & mask;
    s1.data[i] = (~r + 1) & mask;
  }
  return {std::move(s0), std::move(s1)};
}

RingTensor reconstruct_arith(const ArithShareTensor& s0, const ArithShareTensor& s1) {
  check_pair(s0, s1);
  RingTensor out(s0.width, s0.shape);
  const std::uint64_t mask = ring_mask(s0.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (s0.data[i] + s1.data[i]) & mask;
  return out;
}

std::pair<BinShareTensor, BinShareTensor> share_binary(const RingTensor& secret, Prng& rng) {
  const std::uint64_t mask = ring_mask(secret.width);
  BinShareTensor s0(0, secret.width, secret.shape);
  BinShareTensor s1(1, secret.width, secret.shape);
  for (std::size_t i = 0; i < secret.size(); ++i) {
    const std::uint64_t r = rng.next_u64() & mask;
    s0.data[i] = secret.data[i] ^ r;
    s1.data[i] = r;
  }
  return {std::move(s0), std::move(s1)};
}

RingTensor reconstruct_binary(const BinShareTensor& s0, const BinShareTensor& s1) {
  check_pair(s0, s1);
  RingTensor out(s0.width, s0.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = s0.data[i] ^ s1.data[i];
  return out;
}

ArithShareTensor add_shares(const ArithShareTensor& a, const ArithShareTensor& b) {
  check_compatible(a, b);
  ArithShareTensor out = a;
  const std::uint64_t mask = ring_mask(a.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (a.data[i] + b.data[i]) & mask;
  return out;
}

ArithShareTensor sub_shares(const ArithShareTensor& a, const ArithShareTensor& b) {
  check_compatible(a, b);
  ArithShareTensor out = a;
  const std::uint64_t mask = ring_mask(a.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (a.data[i] - b.data[i]) & mask;
  return out;
}

ArithShareTensor add_public(const ArithShareTensor& s, std::uint64_t c) {
  ArithShareTensor out = s;
  if (s.party != 0) return out;
  const std::uint64_t mask = ring_mask(s.width);
  for (auto& w : out.data) w = (w + c) & mask;
  return out;
}

ArithShareTensor add_public(const ArithShareTensor& s, const RingTensor& c) {
  check_compatible(s, c);
  ArithShareTensor out = s;
  if (s.party != 0) return out;
  const std::uint64_t mask = ring_mask(s.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (out.data[i] + c.data[i]) & mask;
  return out;
}

ArithShareTensor mul_public(const ArithShareTensor& s, std::uint64_t a) {
  ArithShareTensor out = s;
  const std::uint64_t mask = ring_mask(s.width);
  for (auto& w : out.data) w = (w * a) & mask;
  return out;
}

BinShareTensor xor_shares(const BinShareTensor& a, const BinShareTensor& b) {
  check_compatible(a, b);
  BinShareTensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] ^= b.data[i];
  return out;
}

ArithShareTensor slice_shares(const ArithShareTensor& s, BitWindow w) {
  if (w.m < 0 || w.k <= w.m || w.k > s.width) {
    throw RangeError("window " + w.to_string() + " outside share width " +
                     std::to_string(s.width));
  }
  ArithShareTensor out(s.party, w.width(), s.shape);
  for (std::size_t i = 0; i < s.size(); ++i) out.data[i] = slice_word(s.data[i], w);
  return out;
}

}  // namespace redring

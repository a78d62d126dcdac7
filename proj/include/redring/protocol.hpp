#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "redring/dealer.hpp"
#include "redring/ring.hpp"
#include "redring/sharing.hpp"
#include "redring/transport.hpp"

namespace redring {

/// One party's view of a two-party computation. Both parties must drive their
/// sessions through the same sequence of calls; the traffic pattern depends on
/// shapes and windows only.
class ProtocolSession {
 public:
  ProtocolSession(Endpoint& endpoint, TripleStore& triples, FixedPointConfig fixed_point = {});

  int party() const noexcept { return endpoint_->party(); }
  Endpoint& endpoint() noexcept { return *endpoint_; }
  TripleStore& triples() noexcept { return *triples_; }
  const FixedPointConfig& fixed_point() const noexcept { return fixed_point_; }

 private:
  Endpoint* endpoint_;
  TripleStore* triples_;
  FixedPointConfig fixed_point_;
};

// ceil(log2(width)), the number of prefix levels of the adder.
int prefix_levels(int width);

/// x*y with one round (e = x - a and f = y - b opened together).
ArithShareTensor beaver_mul(ProtocolSession& s, const ArithShareTensor& x,
                            const ArithShareTensor& y);

/// Bitwise AND of XOR-shared words with one round; masks are packed at `width`.
std::vector<std::uint64_t> and_words(ProtocolSession& s, int width,
                                     std::span<const std::uint64_t> x,
                                     std::span<const std::uint64_t> y);
BinShareTensor beaver_and(ProtocolSession& s, const BinShareTensor& x, const BinShareTensor& y);

/// Kogge-Stone adder on XOR shares. One generate round (tag Other), then
/// prefix_levels(width) rounds tagged Circuit, each a single fused AND batch.
BinShareTensor circuit_add(ProtocolSession& s, const BinShareTensor& a, const BinShareTensor& b);

/// Each party binary-shares its own arithmetic share, then the shares are
/// added with circuit_add.
BinShareTensor a2b(ProtocolSession& s, const ArithShareTensor& x);

/// Bit `bit` of every word, as 1-bit XOR shares.
BinShareTensor extract_bit(const BinShareTensor& x, int bit);

/// Arithmetic shares on 2^out_width of the 1-bit XOR-shared input, computed as
/// b0 + b1 - 2*b0*b1 with one beaver_mul (tag B2A).
ArithShareTensor b2a_bit(ProtocolSession& s, const BinShareTensor& bits, int out_width);

/// 1 iff the secret is nonnegative, evaluated on the reduced ring of bits
/// m..k-1 of each share. Result lives on the full ring of x.
ArithShareTensor drelu(ProtocolSession& s, const ArithShareTensor& x, BitWindow w);

/// x * drelu(x[k:m]); the product is tagged Mult.
ArithShareTensor relu(ProtocolSession& s, const ArithShareTensor& x, BitWindow w);

/// Opens a shared tensor to both parties (one round, tag Other).
RingTensor reveal(ProtocolSession& s, const ArithShareTensor& x);

/// Triples consumed by relu() on `count` elements with window `w`.
TripleDemand relu_triple_demand(std::size_t count, BitWindow w, int ring_bits);
void merge_demand(TripleDemand& into, const TripleDemand& more);

}  // namespace redring

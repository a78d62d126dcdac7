#include "redring/protocol.hpp"

#include "redring/errors.hpp"

namespace redring {

namespace {

template <typename Kind>
void check_operands(const ShareTensor<Kind>& x, const ShareTensor<Kind>& y, int party) {
  if (x.width != y.width || x.shape != y.shape) {
    throw ShapeError("operand mismatch: width " + std::to_string(x.width) + shape_string(x.shape) +
                     " vs " + std::to_string(y.width) + shape_string(y.shape));
  }
  if (x.party != party || y.party != party) throw ShapeError("share belongs to the other party");
}

}  // namespace

ProtocolSession::ProtocolSession(Endpoint& endpoint, TripleStore& triples,
                                 FixedPointConfig fixed_point)
    : endpoint_(&endpoint), triples_(&triples), fixed_point_(fixed_point) {
  fixed_point_.validate();
  if (triples.party() != endpoint.party()) throw ConfigError("triple store of the wrong party");
}

int prefix_levels(int width) {
  int levels = 0;
  while ((1 << levels) < width) ++levels;
  return levels;
}

ArithShareTensor beaver_mul(ProtocolSession& s, const ArithShareTensor& x,
                            const ArithShareTensor& y) {
  check_operands(x, y, s.party());
  const std::size_t n = x.size();
  const int width = x.width;
  const std::uint64_t mask = ring_mask(width);
  const TripleView t = s.triples().draw(TripleKind::Arith, width, n);

  std::vector<std::uint64_t> masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = (x.data[i] - t.a[i]) & mask;
    masked[n + i] = (y.data[i] - t.b[i]) & mask;
  }
  const auto peer = exchange_words(s.endpoint(), masked, width);

  ArithShareTensor z(s.party(), width, x.shape);
  const bool lead = s.party() == 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t e = masked[i] + peer[i];
    const std::uint64_t f = masked[n + i] + peer[n + i];
    std::uint64_t v = t.c[i] + e * t.b[i] + f * t.a[i];
    if (lead) v += e * f;
    z.data[i] = v & mask;
  }
  return z;
}

std::vector<std::uint64_t> and_words(ProtocolSession& s, int width,
                                     std::span<const std::uint64_t> x,
                                     std::span<const std::uint64_t> y) {
  if (x.size() != y.size()) throw ShapeError("and_words operand length mismatch");
  const std::size_t n = x.size();
  const TripleView t = s.triples().draw(TripleKind::Bool, width, n);

  std::vector<std::uint64_t> masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = x[i] ^ t.a[i];
    masked[n + i] = y[i] ^ t.b[i];
  }
  const auto peer = exchange_words(s.endpoint(), masked, width);

  std::vector<std::uint64_t> z(n);
  const bool lead = s.party() == 0;
  const std::uint64_t mask = ring_mask(width);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t e = masked[i] ^ peer[i];
    const std::uint64_t f = masked[n + i] ^ peer[n + i];
    std::uint64_t v = t.c[i] ^ (e & t.b[i]) ^ (f & t.a[i]);
    if (lead) v ^= e & f;
    z[i] = v & mask;
  }
  return z;
}

BinShareTensor beaver_and(ProtocolSession& s, const BinShareTensor& x, const BinShareTensor& y) {
  check_operands(x, y, s.party());
  return BinShareTensor(s.party(), x.width, x.shape, and_words(s, x.width, x.data, y.data));
}

BinShareTensor circuit_add(ProtocolSession& s, const BinShareTensor& a, const BinShareTensor& b) {
  check_operands(a, b, s.party());
  const int width = a.width;
  const std::size_t n = a.size();
  const std::uint64_t mask = ring_mask(width);

  BinShareTensor sum = xor_shares(a, b);
  if (width == 1) return sum;

  // Bitwise generate and propagate.
  std::vector<std::uint64_t> gen =
      with_tag(s.endpoint(), Tag::Other, [&] { return and_words(s, width, a.data, b.data); });
  std::vector<std::uint64_t> prop = sum.data;

  const int levels = prefix_levels(width);
  TagScope circuit(s.endpoint(), Tag::Circuit);
  std::vector<std::uint64_t> lhs, rhs;
  for (int level = 0; level < levels; ++level) {
    const int shift = 1 << level;
    const bool last = level + 1 == levels;
    // G' = G ^ (P & G<<s) and P' = P & P<<s in one batch; the final level
    // only needs G.
    lhs.assign(prop.begin(), prop.end());
    rhs.resize(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = (gen[i] << shift) & mask;
    if (!last) {
      lhs.insert(lhs.end(), prop.begin(), prop.end());
      rhs.resize(2 * n);
      for (std::size_t i = 0; i < n; ++i) rhs[n + i] = (prop[i] << shift) & mask;
    }
    const auto z = and_words(s, width, lhs, rhs);
    for (std::size_t i = 0; i < n; ++i) gen[i] ^= z[i];
    if (!last) std::copy(z.begin() + static_cast<std::ptrdiff_t>(n), z.end(), prop.begin());
  }

  for (std::size_t i = 0; i < n; ++i) sum.data[i] ^= (gen[i] << 1) & mask;
  return sum;
}

BinShareTensor a2b(ProtocolSession& s, const ArithShareTensor& x) {
  if (x.party != s.party()) throw ShapeError("share belongs to the other party");
  // Party p's arithmetic share becomes the p-th addend, held as (share, 0).
  BinShareTensor own(s.party(), x.width, x.shape, x.data);
  BinShareTensor zero(s.party(), x.width, x.shape);
  return s.party() == 0 ? circuit_add(s, own, zero) : circuit_add(s, zero, own);
}

BinShareTensor extract_bit(const BinShareTensor& x, int bit) {
  if (bit < 0 || bit >= x.width) throw RangeError("bit index outside width");
  BinShareTensor out(x.party, 1, x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = (x.data[i] >> bit) & 1U;
  return out;
}

ArithShareTensor b2a_bit(ProtocolSession& s, const BinShareTensor& bits, int out_width) {
  if (bits.width != 1) throw ShapeError("b2a_bit expects 1-bit shares");
  if (bits.party != s.party()) throw ShapeError("share belongs to the other party");
  TagScope scope(s.endpoint(), Tag::B2A);
  const std::size_t n = bits.size();
  // X holds party 0's bit, Y holds party 1's bit, each as an arithmetic sharing.
  ArithShareTensor own(s.party(), out_width, bits.shape, bits.data);
  ArithShareTensor zero(s.party(), out_width, bits.shape);
  const bool lead = s.party() == 0;
  const ArithShareTensor prod = lead ? beaver_mul(s, own, zero) : beaver_mul(s, zero, own);
  ArithShareTensor out(s.party(), out_width, bits.shape);
  const std::uint64_t mask = ring_mask(out_width);
  for (std::size_t i = 0; i < n; ++i) out.data[i] = (bits.data[i] - 2 * prod.data[i]) & mask;
  return out;
}

ArithShareTensor drelu(ProtocolSession& s, const ArithShareTensor& x, BitWindow w) {
  w.validate(x.width);
  const ArithShareTensor small = slice_shares(x, w);
  const BinShareTensor bin = a2b(s, small);
  const BinShareTensor msb = extract_bit(bin, w.width() - 1);
  const ArithShareTensor neg = b2a_bit(s, msb, x.width);
  // 1 - msb
  ArithShareTensor out(s.party(), x.width, x.shape);
  const std::uint64_t mask = ring_mask(x.width);
  const std::uint64_t one = s.party() == 0 ? 1 : 0;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (one - neg.data[i]) & mask;
  return out;
}

ArithShareTensor relu(ProtocolSession& s, const ArithShareTensor& x, BitWindow w) {
  const ArithShareTensor d = drelu(s, x, w);
  return with_tag(s.endpoint(), Tag::Mult, [&] { return beaver_mul(s, x, d); });
}

RingTensor reveal(ProtocolSession& s, const ArithShareTensor& x) {
  if (x.party != s.party()) throw ShapeError("share belongs to the other party");
  const auto peer = with_tag(s.endpoint(), Tag::Other,
                             [&] { return exchange_words(s.endpoint(), x.data, x.width); });
  RingTensor out(x.width, x.shape);
  const std::uint64_t mask = ring_mask(x.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (x.data[i] + peer[i]) & mask;
  return out;
}

TripleDemand relu_triple_demand(std::size_t count, BitWindow w, int ring_bits) {
  TripleDemand d;
  if (count == 0) return d;
  const int levels = prefix_levels(w.width());
  // generate + two per non-final level + one at the final level
  const std::size_t bool_per_elem = levels == 0 ? 0 : static_cast<std::size_t>(2 * levels);
  if (bool_per_elem) d[TripleKey{TripleKind::Bool, w.width()}] = bool_per_elem * count;
  d[TripleKey{TripleKind::Arith, ring_bits}] = 2 * count;
  return d;
}

void merge_demand(TripleDemand& into, const TripleDemand& more) {
  for (const auto& [key, count] : more) into[key] += count;
}

}  // namespace redring

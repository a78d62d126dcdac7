#include "redring/ring.hpp"

#include <cmath>

#include "redring/errors.hpp"

namespace redring {

namespace {

void check_width(int width) {
  if (width < 1 || width > kMaxRingBits) {
    throw RangeError("ring width " + std::to_string(width) + " outside 1..64");
  }
}

}  // namespace

RingElement::RingElement(std::uint64_t value, int width) : value_(value), width_(width) {
  check_width(width);
  value_ &= ring_mask(width);
}

RingElement RingElement::from_signed(std::int64_t value, int width) {
  return RingElement(static_cast<std::uint64_t>(value), width);
}

void FixedPointConfig::validate() const {
  check_width(ring_bits);
  if (frac_bits <= 0 || frac_bits >= ring_bits) {
    throw ConfigError("frac_bits must satisfy 0 < f < ring_bits (got f=" +
                      std::to_string(frac_bits) + ", N=" + std::to_string(ring_bits) + ")");
  }
}

double FixedPointConfig::scale() const { return std::ldexp(1.0, frac_bits); }

void BitWindow::validate(int ring_bits) const {
  if (m < 0 || k <= m || k > ring_bits) {
    throw RangeError("window " + to_string() + " outside ring of " + std::to_string(ring_bits) +
                     " bits");
  }
  if (k - m < 2) {
    throw RangeError("window " + to_string() + " narrower than 2 bits");
  }
}

std::string BitWindow::to_string() const {
  return "[" + std::to_string(k) + ":" + std::to_string(m) + "]";
}

std::uint64_t encode_fixed_word(double x, const FixedPointConfig& cfg) {
  const double scaled = std::ldexp(x, cfg.frac_bits);
  const double limit = std::ldexp(1.0, cfg.ring_bits - 1);
  if (!std::isfinite(scaled) || !(std::fabs(scaled) < limit)) {
    throw EncodeRangeError("fixed-point encode overflow for value " + std::to_string(x));
  }
  // llround rounds halfway cases away from zero.
  const long long rounded = std::llround(scaled);
  return static_cast<std::uint64_t>(rounded) & ring_mask(cfg.ring_bits);
}

RingElement encode_fixed(double x, const FixedPointConfig& cfg) {
  return RingElement(encode_fixed_word(x, cfg), cfg.ring_bits);
}

double decode_fixed_word(std::uint64_t v, const FixedPointConfig& cfg) {
  return std::ldexp(static_cast<double>(to_signed(v, cfg.ring_bits)), -cfg.frac_bits);
}

double decode_fixed(RingElement e, const FixedPointConfig& cfg) {
  if (e.width() != cfg.ring_bits) {
    throw RangeError("decode of width-" + std::to_string(e.width()) + " element on a " +
                     std::to_string(cfg.ring_bits) + "-bit config");
  }
  return decode_fixed_word(e.value(), cfg);
}

RingElement slice_bits(RingElement e, BitWindow w) {
  if (w.m < 0 || w.k <= w.m || w.k > e.width()) {
    throw RangeError("window " + w.to_string() + " outside element of width " +
                     std::to_string(e.width()));
  }
  return RingElement(slice_word(e.value(), w), w.k - w.m);
}

}  // namespace redring

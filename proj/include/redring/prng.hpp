#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

namespace redring {

/// Seeded ChaCha20 keystream generator. Streams with different ids under the
/// same seed are independent, which lets both parties (and the dealer) derive
/// matching randomness per purpose without sharing state.
class Prng {
 public:
  using result_type = std::uint64_t;

  explicit Prng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();
  void fill(std::span<std::uint64_t> out);

 private:
  void refill();

  static constexpr std::size_t kBufferWords = 128;

  std::array<unsigned char, 32> key_{};
  std::array<unsigned char, 8> nonce_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint64_t, kBufferWords> buffer_{};
  std::size_t pos_ = kBufferWords;
};

// Stream-id derivation so call sites do not collide.
std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace redring

namespace redring {

// Hex BLAKE2b digest (16 bytes) of the given bytes.
std::string digest_hex(std::span<const unsigned char> bytes);
std::string digest_hex(const std::string& text);

}  // namespace redring

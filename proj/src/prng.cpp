#include "redring/prng.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace redring {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

void store_le(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Prng::Prng(std::uint64_t seed, std::uint64_t stream) {
  ensure_sodium();
  unsigned char seed_bytes[8];
  store_le(seed_bytes, seed);
  crypto_generichash(key_.data(), key_.size(), seed_bytes, sizeof seed_bytes, nullptr, 0);
  store_le(nonce_.data(), stream);
}

void Prng::refill() {
  static constexpr std::size_t kBytes = kBufferWords * sizeof(std::uint64_t);
  static const std::array<unsigned char, kBytes> zeros{};
  unsigned char bytes[kBytes];
  crypto_stream_chacha20_xor_ic(bytes, zeros.data(), kBytes, nonce_.data(), block_counter_,
                                key_.data());
  block_counter_ += kBytes / 64;
  for (std::size_t i = 0; i < kBufferWords; ++i) {
    std::uint64_t w = 0;
    for (int j = 7; j >= 0; --j) w = (w << 8) | bytes[i * 8 + static_cast<std::size_t>(j)];
    buffer_[i] = w;
  }
  pos_ = 0;
}

std::uint64_t Prng::next_u64() {
  if (pos_ == kBufferWords) refill();
  return buffer_[pos_++];
}

void Prng::fill(std::span<std::uint64_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == kBufferWords) refill();
    const std::size_t n = std::min(out.size() - done, kBufferWords - pos_);
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin() + static_cast<std::ptrdiff_t>(done));
    pos_ += n;
    done += n;
  }
}

std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

}  // namespace redring

namespace redring {

std::string digest_hex(std::span<const unsigned char> bytes) {
  ensure_sodium();
  unsigned char out[16];
  crypto_generichash(out, sizeof out, bytes.data(), bytes.size(), nullptr, 0);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned char c : out) {
    s.push_back(hex[c >> 4]);
    s.push_back(hex[c & 15]);
  }
  return s;
}

std::string digest_hex(const std::string& text) {
  return digest_hex(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace redring

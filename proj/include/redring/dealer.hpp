#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace redring {

enum class TripleKind : std::uint32_t { Arith = 1, Bool = 2 };

const char* triple_kind_name(TripleKind kind);
TripleKind triple_kind_from_name(const std::string& name);

/// One party's (a, b, c) share arrays.
struct TripleShares {
  std::vector<std::uint64_t> a, b, c;

  std::size_t size() const noexcept { return a.size(); }
  friend bool operator==(const TripleShares&, const TripleShares&) = default;
};

/// Dealer output for both parties. Arith: c = a*b mod 2^width with additive
/// shares. Bool: c = a & b with XOR shares of width-bit words.
struct TripleBatch {
  TripleKind kind = TripleKind::Arith;
  int width = 64;
  std::uint64_t seed = 0;
  std::array<TripleShares, 2> party;

  std::size_t count() const noexcept { return party[0].size(); }
  friend bool operator==(const TripleBatch&, const TripleBatch&) = default;
};

TripleBatch gen_arith_triples(std::size_t count, int width, std::uint64_t seed);
TripleBatch gen_bool_triples(std::size_t count, int width, std::uint64_t seed);
TripleBatch gen_triples(TripleKind kind, std::size_t count, int width, std::uint64_t seed);

// File: "HBTRIP1", then u32 kind, u32 width, u64 count, u64 seed, then party 0
// a,b,c and party 1 a,b,c as u64 words. Everything little-endian.
void save_triples(const TripleBatch& batch, const std::filesystem::path& path);
TripleBatch load_triples(const std::filesystem::path& path);

struct TripleKey {
  TripleKind kind;
  int width;
  friend auto operator<=>(const TripleKey&, const TripleKey&) = default;
};

using TripleDemand = std::map<TripleKey, std::size_t>;

struct TripleView {
  std::span<const std::uint64_t> a, b, c;
  std::size_t size() const noexcept { return a.size(); }
};

/// A party's pool of correlated randomness. Every triple is handed out at most
/// once; running dry raises TripleExhaustedError.
class TripleStore {
 public:
  explicit TripleStore(int party) : party_(party) {}

  int party() const noexcept { return party_; }

  // Keeps this store's party half of the batch.
  void add(const TripleBatch& batch);
  void add(TripleKind kind, int width, TripleShares shares);

  TripleView draw(TripleKind kind, int width, std::size_t count);

  std::size_t remaining(TripleKind kind, int width) const;
  std::size_t consumed(TripleKind kind, int width) const;
  // Consumption totals per key since construction.
  TripleDemand consumption() const;

 private:
  struct Pool {
    TripleShares shares;
    std::size_t cursor = 0;
  };
  int party_;
  std::map<TripleKey, Pool> pools_;
};

// Per-key batch seeds derived from one session seed; both parties derive the
// same batches.
TripleBatch gen_for_key(const TripleKey& key, std::size_t count, std::uint64_t session_seed);
std::pair<TripleStore, TripleStore> provision(const TripleDemand& demand, std::uint64_t seed);
TripleStore provision_party(const TripleDemand& demand, std::uint64_t seed, int party);

}  // namespace redring

#include "redring/dealer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>

#include "redring/errors.hpp"
#include "redring/prng.hpp"
#include "redring/ring.hpp"

namespace redring {

namespace {

constexpr char kMagic[7] = {'H', 'B', 'T', 'R', 'I', 'P', '1'};
constexpr std::size_t kHeaderBytes = sizeof kMagic + 4 + 4 + 8 + 8;

void check_width(int width) {
  if (width < 1 || width > 64) throw RangeError("triple width outside 1..64");
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_le(const unsigned char* p, int n) {
  std::uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

TripleBatch make_batch(TripleKind kind, std::size_t count, int width, std::uint64_t seed) {
  check_width(width);
  TripleBatch batch;
  batch.kind = kind;
  batch.width = width;
  batch.seed = seed;
  for (auto& p : batch.party) {
    p.a.resize(count);
    p.b.resize(count);
    p.c.resize(count);
  }
  Prng rng(seed, derive_stream(static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(width)));
  const std::uint64_t mask = ring_mask(width);
  auto& p0 = batch.party[0];
  auto& p1 = batch.party[1];
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t a = rng() & mask;
    const std::uint64_t b = rng() & mask;
    const std::uint64_t ra = rng() & mask;
    const std::uint64_t rb = rng() & mask;
    const std::uint64_t rc = rng() & mask;
    if (kind == TripleKind::Arith) {
      const std::uint64_t c = (a * b) & mask;
      p0.a[i] = ra;
      p1.a[i] = (a - ra) & mask;
      p0.b[i] = rb;
      p1.b[i] = (b - rb) & mask;
      p0.c[i] = rc;
      p1.c[i] = (c - rc) & mask;
    } else {
      const std::uint64_t c = a & b;
      p0.a[i] = ra;
      p1.a[i] = a ^ ra;
      p0.b[i] = rb;
      p1.b[i] = b ^ rb;
      p0.c[i] = rc;
      p1.c[i] = c ^ rc;
    }
  }
  return batch;
}

}  // namespace

const char* triple_kind_name(TripleKind kind) {
  return kind == TripleKind::Arith ? "arith" : "bool";
}

TripleKind triple_kind_from_name(const std::string& name) {
  if (name == "arith") return TripleKind::Arith;
  if (name == "bool") return TripleKind::Bool;
  throw ConfigError("triple kind must be 'arith' or 'bool', got '" + name + "'");
}

TripleBatch gen_arith_triples(std::size_t count, int width, std::uint64_t seed) {
  return make_batch(TripleKind::Arith, count, width, seed);
}

TripleBatch gen_bool_triples(std::size_t count, int width, std::uint64_t seed) {
  return make_batch(TripleKind::Bool, count, width, seed);
}

TripleBatch gen_triples(TripleKind kind, std::size_t count, int width, std::uint64_t seed) {
  return make_batch(kind, count, width, seed);
}

void save_triples(const TripleBatch& batch, const std::filesystem::path& path) {
  const std::size_t n = batch.count();
  std::vector<unsigned char> out;
  out.reserve(kHeaderBytes + 6 * 8 * n);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(batch.kind));
  put_u32(out, static_cast<std::uint32_t>(batch.width));
  put_u64(out, n);
  put_u64(out, batch.seed);
  for (const auto& p : batch.party) {
    for (const auto* arr : {&p.a, &p.b, &p.c}) {
      if (arr->size() != n) throw FormatError("ragged triple batch");
      for (std::uint64_t w : *arr) put_u64(out, w);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("short write to " + path.string());
}

TripleBatch load_triples(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open triple file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a triple file");
  }
  const unsigned char* h = bytes.data() + sizeof kMagic;
  const auto kind_raw = static_cast<std::uint32_t>(get_le(h, 4));
  const auto width = static_cast<int>(get_le(h + 4, 4));
  const std::uint64_t count = get_le(h + 8, 8);
  const std::uint64_t seed = get_le(h + 16, 8);
  if (kind_raw != 1 && kind_raw != 2) throw FormatError(path.string() + ": bad triple kind");
  if (width < 1 || width > 64) throw FormatError(path.string() + ": bad triple width");
  if (count > (bytes.size() - kHeaderBytes) / 48 || bytes.size() != kHeaderBytes + 48 * count) {
    throw FormatError(path.string() + ": truncated or oversized triple payload");
  }
  TripleBatch batch;
  batch.kind = static_cast<TripleKind>(kind_raw);
  batch.width = width;
  batch.seed = seed;
  const unsigned char* p = bytes.data() + kHeaderBytes;
  const std::uint64_t mask = ring_mask(width);
  for (auto& party : batch.party) {
    for (auto* arr : {&party.a, &party.b, &party.c}) {
      arr->resize(count);
      for (auto& w : *arr) {
        w = get_le(p, 8);
        if (w & ~mask) throw FormatError(path.string() + ": share word exceeds triple width");
        p += 8;
      }
    }
  }
  return batch;
}

void TripleStore::add(const TripleBatch& batch) {
  add(batch.kind, batch.width, batch.party[static_cast<std::size_t>(party_)]);
}

void TripleStore::add(TripleKind kind, int width, TripleShares shares) {
  check_width(width);
  auto& pool = pools_[TripleKey{kind, width}];
  if (pool.cursor == 0 && pool.shares.size() == 0) {
    pool.shares = std::move(shares);
    return;
  }
  for (auto [dst, src] : {std::pair{&pool.shares.a, &shares.a}, std::pair{&pool.shares.b, &shares.b},
                          std::pair{&pool.shares.c, &shares.c}}) {
    dst->insert(dst->end(), src->begin(), src->end());
  }
}

TripleView TripleStore::draw(TripleKind kind, int width, std::size_t count) {
  auto it = pools_.find(TripleKey{kind, width});
  const std::size_t left = it == pools_.end() ? 0 : it->second.shares.size() - it->second.cursor;
  if (count > left) {
    throw TripleExhaustedError(std::string("need ") + std::to_string(count) + " " +
                               triple_kind_name(kind) + " triples of width " +
                               std::to_string(width) + ", " + std::to_string(left) + " left");
  }
  if (count == 0) return {};
  auto& pool = it->second;
  const std::size_t off = pool.cursor;
  pool.cursor += count;
  return TripleView{std::span(pool.shares.a).subspan(off, count),
                    std::span(pool.shares.b).subspan(off, count),
                    std::span(pool.shares.c).subspan(off, count)};
}

std::size_t TripleStore::remaining(TripleKind kind, int width) const {
  auto it = pools_.find(TripleKey{kind, width});
  return it == pools_.end() ? 0 : it->second.shares.size() - it->second.cursor;
}

std::size_t TripleStore::consumed(TripleKind kind, int width) const {
  auto it = pools_.find(TripleKey{kind, width});
  return it == pools_.end() ? 0 : it->second.cursor;
}

TripleDemand TripleStore::consumption() const {
  TripleDemand d;
  for (const auto& [key, pool] : pools_) {
    if (pool.cursor) d[key] = pool.cursor;
  }
  return d;
}

TripleBatch gen_for_key(const TripleKey& key, std::size_t count, std::uint64_t session_seed) {
  const std::uint64_t seed =
      derive_stream(session_seed, static_cast<std::uint64_t>(key.kind), static_cast<std::uint64_t>(key.width));
  return gen_triples(key.kind, count, key.width, seed);
}

std::pair<TripleStore, TripleStore> provision(const TripleDemand& demand, std::uint64_t seed) {
  std::pair<TripleStore, TripleStore> stores{TripleStore(0), TripleStore(1)};
  for (const auto& [key, count] : demand) {
    auto batch = gen_for_key(key, count, seed);
    stores.first.add(batch.kind, batch.width, std::move(batch.party[0]));
    stores.second.add(batch.kind, batch.width, std::move(batch.party[1]));
  }
  return stores;
}

TripleStore provision_party(const TripleDemand& demand, std::uint64_t seed, int party) {
  TripleStore store(party);
  for (const auto& [key, count] : demand) {
    auto batch = gen_for_key(key, count, seed);
    store.add(batch.kind, batch.width, std::move(batch.party[static_cast<std::size_t>(party)]));
  }
  return store;
}

}  // namespace redring

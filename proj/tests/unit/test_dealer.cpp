#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "redring/dealer.hpp"
#include "redring/errors.hpp"
#include "redring/ring.hpp"

using namespace redring;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

std::vector<char> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::uint64_t fnv1a(const std::vector<char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

TEST_CASE("arith triples satisfy c = ab") {
  const auto batch = gen_arith_triples(10000, 16, 42);
  REQUIRE(batch.count() == 10000);
  const std::uint64_t mask = ring_mask(16);
  for (std::size_t i = 0; i < batch.count(); ++i) {
    const auto& p0 = batch.party[0];
    const auto& p1 = batch.party[1];
    const std::uint64_t a = p0.a[i] + p1.a[i], b = p0.b[i] + p1.b[i], c = p0.c[i] + p1.c[i];
    REQUIRE(((a * b) & mask) == (c & mask));
    REQUIRE(p0.a[i] <= mask);
  }
}

TEST_CASE("bool triples satisfy c = a & b") {
  const auto batch = gen_bool_triples(10000, 5, 43);
  for (std::size_t i = 0; i < batch.count(); ++i) {
    const auto& p0 = batch.party[0];
    const auto& p1 = batch.party[1];
    REQUIRE((((p0.a[i] ^ p1.a[i]) & (p0.b[i] ^ p1.b[i]))) == (p0.c[i] ^ p1.c[i]));
    REQUIRE(p1.c[i] <= ring_mask(5));
  }
}

TEST_CASE("generation is deterministic and empty batches are fine") {
  CHECK(gen_arith_triples(0, 64, 1).count() == 0);
  CHECK(gen_arith_triples(100, 64, 7) == gen_arith_triples(100, 64, 7));
  CHECK(gen_bool_triples(100, 8, 7) == gen_bool_triples(100, 8, 7));
  CHECK_FALSE(gen_arith_triples(100, 64, 7) == gen_arith_triples(100, 64, 8));
}

TEST_CASE("triple file roundtrip and golden digest") {
  const auto path = temp_file("redring_test_triples.bin");
  const auto batch = gen_bool_triples(33, 8, 2024);
  save_triples(batch, path);
  CHECK(load_triples(path) == batch);

  const auto bytes = read_all(path);
  CHECK(bytes.size() == 7 + 4 + 4 + 8 + 8 + 6 * 33 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 7) == "HBTRIP1");

  save_triples(gen_arith_triples(16, 64, 12345), path);
  CHECK(fnv1a(read_all(path)) == 0xd08675d6290c4570ULL);
  fs::remove(path);
}

TEST_CASE("malformed triple files") {
  const auto path = temp_file("redring_test_triples_bad.bin");
  save_triples(gen_arith_triples(10, 32, 1), path);
  auto bytes = read_all(path);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  }
  CHECK_THROWS_AS(load_triples(path), FormatError);

  bytes[0] = 'X';
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_triples(path), FormatError);
  CHECK_THROWS_AS(load_triples(temp_file("redring_missing_file.bin")), FormatError);
  fs::remove(path);
}

TEST_CASE("store draws each triple once") {
  TripleStore store(0);
  const auto batch = gen_arith_triples(10, 64, 3);
  store.add(batch);
  const auto v1 = store.draw(TripleKind::Arith, 64, 4);
  const auto v2 = store.draw(TripleKind::Arith, 64, 6);
  CHECK(v1.a[0] == batch.party[0].a[0]);
  CHECK(v2.a[0] == batch.party[0].a[4]);
  CHECK(store.remaining(TripleKind::Arith, 64) == 0);
  CHECK(store.consumed(TripleKind::Arith, 64) == 10);
  CHECK_THROWS_AS(store.draw(TripleKind::Arith, 64, 1), TripleExhaustedError);
  CHECK_THROWS_AS(store.draw(TripleKind::Bool, 8, 1), TripleExhaustedError);
  CHECK(store.draw(TripleKind::Bool, 8, 0).size() == 0);
}

TEST_CASE("provision gives both parties matching halves") {
  TripleDemand d{{{TripleKind::Arith, 64}, 5}, {{TripleKind::Bool, 3}, 7}};
  auto [s0, s1] = provision(d, 77);
  auto p1 = provision_party(d, 77, 1);
  CHECK(s0.remaining(TripleKind::Bool, 3) == 7);
  const auto a = s1.draw(TripleKind::Bool, 3, 7);
  const auto b = p1.draw(TripleKind::Bool, 3, 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(a.c[i] == b.c[i]);
}

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "redring/errors.hpp"
#include "redring/nn.hpp"
#include "support/fixed_oracle.hpp"
#include "support/two_party.hpp"

using namespace redring;
using redring::testing::fx_encode;
using redring::testing::fx_layer;
using redring::testing::FixedTensor;
using redring::testing::run_two_party;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("redring_nn_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Fixed shares of x with per-element masks from a seeded engine.
std::pair<ArithShareTensor, ArithShareTensor> split(const std::vector<std::int64_t>& x, Shape shape,
                                                    std::uint64_t seed) {
  std::mt19937_64 g(seed);
  ArithShareTensor s0(0, 64, shape), s1(1, 64, shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::uint64_t r = g();
    s0.data[i] = static_cast<std::uint64_t>(x[i]) + r;
    s1.data[i] = 0 - r;
  }
  return {s0, s1};
}

Tensor random_input(std::size_t n, const Shape& per, std::uint64_t seed) {
  Shape s{n};
  s.insert(s.end(), per.begin(), per.end());
  Tensor t(s);
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t.data) v = u(g);
  return t;
}

}  // namespace

TEST_CASE("truncate_local on (D, 0) gives 1") {
  const int f = 16;
  ArithShareTensor s0(0, 64, {1}, {std::uint64_t{1} << f});
  ArithShareTensor s1(1, 64, {1}, {0});
  const auto t = reconstruct_arith(truncate_local(s0, f), truncate_local(s1, f));
  CHECK(t.data[0] == 1);
}

TEST_CASE("truncate_local error is within one ulp") {
  std::mt19937_64 g(7);
  std::uniform_int_distribution<std::int64_t> dist(-(std::int64_t{1} << 40), std::int64_t{1} << 40);
  const std::size_t n = 100000;
  std::vector<std::int64_t> x(n);
  for (auto& v : x) v = dist(g);
  auto [s0, s1] = split(x, {n}, 11);
  const auto t = reconstruct_arith(truncate_local(s0, 16), truncate_local(s1, 16));
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t delta = t.signed_at(i) - redring::testing::floor_shift(x[i], 16);
    if (delta < 0 || delta > 1) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("identity linear layer is exact on shares") {
  LinearLayer l;
  l.in = l.out = 4;
  l.w.assign(16, 0.0f);
  for (std::size_t i = 0; i < 4; ++i) l.w[i * 4 + i] = 1.0f;
  l.b.assign(4, 0.0f);
  const FixedPointConfig fp;
  const std::vector<std::int64_t> x{-5 << 16, 123456, -1, 0};
  auto [s0, s1] = split(x, {1, 4}, 3);
  const auto t = reconstruct_arith(linear_forward(s0, l, fp), linear_forward(s1, l, fp));
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.signed_at(i) == x[i]);

  l.w.assign(16, 0.0f);
  l.b = {0.5f, -0.25f, 0.0f, 2.0f};
  const auto z = reconstruct_arith(linear_forward(s0, l, fp), linear_forward(s1, l, fp));
  CHECK(z.signed_at(0) == 1 << 15);
  CHECK(z.signed_at(1) == -(1 << 14));
  CHECK(z.signed_at(2) == 0);
  CHECK(z.signed_at(3) == 2 << 16);
}

TEST_CASE("1x1 convolution matches the equivalent linear layer") {
  Conv2dLayer c;
  c.c_in = 3;
  c.c_out = 2;
  c.kh = c.kw = 1;
  c.w = {0.5f, -1.0f, 0.25f, 2.0f, 0.0f, -0.75f};
  c.b = {0.1f, -0.2f};
  LinearLayer l;
  l.in = 3;
  l.out = 2;
  l.w = c.w;
  l.b = c.b;
  const Tensor x = random_input(1, {3, 1, 1}, 5);
  const Tensor yc = apply_layer(c, x);
  const Tensor yl = apply_layer(l, Tensor({1, 3}, x.data));
  REQUIRE(yc.size() == 2);
  CHECK(yc.data[0] == doctest::Approx(yl.data[0]));
  CHECK(yc.data[1] == doctest::Approx(yl.data[1]));
}

TEST_CASE("avgpool of a constant plane returns the constant") {
  const FixedPointConfig fp;
  const std::int64_t c = 3 * (1 << 16) + 12345;
  std::vector<std::int64_t> x(2 * 4 * 4, c);
  auto [s0, s1] = split(x, {1, 2, 4, 4}, 9);
  const AvgPoolLayer p{2, 2, 2};
  const auto t = reconstruct_arith(avgpool_forward(s0, p, fp), avgpool_forward(s1, p, fp));
  REQUIRE(t.size() == 8);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::llabs(t.signed_at(i) - c) <= 1);
}

TEST_CASE("MPC layers stay within 2 ulp of the integer oracle") {
  Model model = make_cnn(3);
  const FixedPointConfig fp = model.fixed_point;
  const std::size_t n = 6;
  const Tensor input = random_input(n, model.input_shape, 21);
  const FixedTensor x0 = fx_encode(input, fp);
  const ReluConfig cfg = ReluConfig::full(model);

  auto res = run_two_party(model_triple_demand(model, cfg, n), 99, [&](ProtocolSession& s, int party) {
    Shape shape = x0.shape;
    auto [a, b] = split(x0.data, shape, 1234);
    ArithShareTensor cur = party == 0 ? a : b;
    std::vector<RingTensor> opened;
    for (const Layer& layer : model.layers) {
      if (const auto* l = std::get_if<LinearLayer>(&layer)) cur = linear_forward(cur, *l, fp);
      else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) cur = conv2d_forward(cur, *c, fp);
      else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) cur = avgpool_forward(cur, *p, fp);
      else if (std::holds_alternative<ReluLayer>(layer)) cur = relu(s, cur, BitWindow::full(64));
      else {
        std::size_t per = cur.size() / n;
        cur.shape = {n, per};
      }
      opened.push_back(reveal(s, cur));
    }
    return opened;
  });

  FixedTensor prev = x0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    CAPTURE(i);
    const RingTensor& got = res.out[0][i];
    CHECK(got == res.out[1][i]);
    const FixedTensor want = fx_layer(model.layers[i], prev, fp);
    REQUIRE(want.data.size() == got.size());
    std::int64_t worst = 0;
    FixedTensor next{want.shape, std::vector<std::int64_t>(got.size())};
    for (std::size_t j = 0; j < got.size(); ++j) {
      next.data[j] = got.signed_at(j);
      worst = std::max<std::int64_t>(worst, std::llabs(next.data[j] - want.data[j]));
    }
    CHECK(worst <= 2);
    prev = next;
  }
}

TEST_CASE("model manifest roundtrip") {
  const fs::path dir = scratch("model");
  const Model m = make_cnn(4);
  save_model(m, dir);
  const Model back = load_model(dir);
  REQUIRE(back.layers.size() == m.layers.size());
  CHECK(back.input_shape == m.input_shape);
  const Tensor x = random_input(3, m.input_shape, 2);
  CHECK(plain_forward(back, x).data == plain_forward(m, x).data);
  CHECK(load_model(dir / "manifest.json").layers.size() == m.layers.size());
  CHECK(back.group_numel() == std::vector<std::size_t>{512, 256});
}

TEST_CASE("model load errors") {
  const fs::path dir = scratch("bad_model");
  save_model(make_mlp(1), dir);
  SUBCASE("truncated blob") {
    fs::resize_file(dir / "fc0.w.bin", 12);
    CHECK_THROWS_AS(load_model(dir), ShapeError);
  }
  SUBCASE("missing blob") {
    fs::remove(dir / "fc1.b.bin");
    CHECK_THROWS_AS(load_model(dir), FormatError);
  }
  SUBCASE("malformed manifest") {
    std::ofstream(dir / "manifest.json") << "{\"layers\": [";
    CHECK_THROWS_AS(load_model(dir), FormatError);
  }
  SUBCASE("unknown layer") {
    std::ofstream(dir / "manifest.json")
        << R"({"fixed_point":{"ring_bits":64,"frac_bits":16},"input_shape":[4],"layers":[{"type":"maxpool"}],"blobs":{}})";
    CHECK_THROWS_AS(load_model(dir), FormatError);
  }
}

TEST_CASE("model validation") {
  Model m = make_toy(1);
  CHECK_NOTHROW(m.validate());
  std::get<ReluLayer>(m.layers[3]).group = 2;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  Model s = make_mlp(1);
  std::get<LinearLayer>(s.layers[2]).in = 31;
  CHECK_THROWS_AS(s.validate(), ShapeError);
}

TEST_CASE("relu config json") {
  const Model m = make_toy(1);
  ReluConfig c;
  c.groups = {BitWindow{20, 4}, std::nullopt};
  const auto j = c.to_json();
  CHECK(ReluConfig::from_json(j) == c);
  CHECK(ReluConfig::from_json(j.at("groups")) == c);
  CHECK_NOTHROW(c.validate(m));
  c.groups.pop_back();
  CHECK_THROWS_AS(c.validate(m), ConfigError);
  CHECK(ReluConfig::full(m).groups.size() == 2);
}

TEST_CASE("IDX roundtrip and malformed files") {
  const fs::path dir = scratch("idx");
  IdxArray a{{2, 3}, {1, 2, 3, 4, 5, 6}};
  save_idx(a, dir / "a.idx");
  const IdxArray b = load_idx(dir / "a.idx");
  CHECK(b.dims == a.dims);
  CHECK(b.data == a.data);
  {
    std::ifstream in(dir / "a.idx", std::ios::binary);
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), {}};
    REQUIRE(bytes.size() == 4 + 8 + 6);
    CHECK(bytes[2] == 0x08);
    CHECK(bytes[3] == 2);
    CHECK(bytes[7] == 2);
  }
  fs::resize_file(dir / "a.idx", 15);
  CHECK_THROWS_AS(load_idx(dir / "a.idx"), FormatError);
  std::ofstream(dir / "m.idx", std::ios::binary) << std::string("\x00\x00\x0d\x01\x00\x00\x00\x00", 8);
  CHECK_THROWS_AS(load_idx(dir / "m.idx"), FormatError);
}

TEST_CASE("synthetic data is deterministic") {
  const Dataset a = gen_synthetic(5, 200);
  const Dataset b = gen_synthetic(5, 200);
  const Dataset c = gen_synthetic(6, 200);
  CHECK(a.pixels == b.pixels);
  CHECK(a.labels == b.labels);
  CHECK(a.pixels != c.pixels);
  for (auto l : a.labels) CHECK(l < 10);
  const fs::path dir = scratch("ds");
  save_dataset(a, dir / "i.idx", dir / "l.idx");
  const Dataset r = load_dataset(dir / "i.idx", dir / "l.idx");
  CHECK(r.pixels == a.pixels);
  CHECK(r.labels == a.labels);
  CHECK(a.slice(10, 20).size() == 10);
}

TEST_CASE("training beats chance on synthetic blobs") {
  Model m = make_mlp(2);
  const Dataset d = gen_synthetic(1, 1024);
  TrainOptions opt;
  opt.epochs = 4;
  CHECK(train(m, d, opt) > 0.4);
}

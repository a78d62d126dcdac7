#include <array>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernels.hpp"
#include "redring/errors.hpp"
#include "redring/nn.hpp"
#include "redring/prng.hpp"

namespace redring {

namespace {

constexpr std::uint64_t kLayoutSeed = 0x5eed0f1a7e5ULL;

double uniform01(Prng& rng) { return static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53; }

// Box-Muller; portable across standard libraries, unlike std::normal_distribution.
double normal(Prng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<float> he_init(Prng& rng, std::size_t count, std::size_t fan_in) {
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<float> w(count);
  for (auto& v : w) v = static_cast<float>(sd * normal(rng));
  return w;
}

LinearLayer make_linear(Prng& rng, std::size_t in, std::size_t out, const std::string& name) {
  LinearLayer l;
  l.in = in;
  l.out = out;
  l.weight = name + ".w";
  l.bias = name + ".b";
  l.w = he_init(rng, in * out, in);
  l.b.assign(out, 0.0f);
  return l;
}

Conv2dLayer make_conv(Prng& rng, std::size_t c_in, std::size_t c_out, const std::string& name) {
  Conv2dLayer c;
  c.c_in = c_in;
  c.c_out = c_out;
  c.kh = c.kw = 3;
  c.stride = 1;
  c.pad = 1;
  c.weight = name + ".w";
  c.bias = name + ".b";
  c.w = he_init(rng, c_out * c_in * 9, c_in * 9);
  c.b.assign(c_out, 0.0f);
  return c;
}

}  // namespace

Dataset gen_synthetic(std::uint64_t seed, std::size_t n_samples, int n_classes) {
  if (n_classes < 2 || n_classes > 256) throw ConfigError("n_classes must be in 2..256");
  constexpr std::size_t kSide = 8;
  // Two blob centres per class, fixed across seeds so train and validation
  // sets share the same classes.
  Prng layout(kLayoutSeed);
  std::vector<std::array<double, 4>> centres(static_cast<std::size_t>(n_classes));
  for (auto& c : centres) {
    for (auto& v : c) v = 1.0 + 5.0 * uniform01(layout);
  }

  Prng rng(seed, derive_stream(0xda7a));
  Dataset ds;
  ds.rows = ds.cols = kSide;
  ds.pixels.resize(n_samples * kSide * kSide);
  ds.labels.resize(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto label = static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(n_classes));
    ds.labels[s] = static_cast<std::uint8_t>(label);
    const auto& c = centres[label];
    const double x0 = c[0] + 0.7 * normal(rng), y0 = c[1] + 0.7 * normal(rng);
    const double x1 = c[2] + 0.7 * normal(rng), y1 = c[3] + 0.7 * normal(rng);
    const double a0 = 0.6 + 0.4 * uniform01(rng), a1 = 0.3 + 0.5 * uniform01(rng);
    const double sigma = 1.0 + 0.5 * uniform01(rng);
    for (std::size_t y = 0; y < kSide; ++y) {
      for (std::size_t x = 0; x < kSide; ++x) {
        const double dx0 = static_cast<double>(x) - x0, dy0 = static_cast<double>(y) - y0;
        const double dx1 = static_cast<double>(x) - x1, dy1 = static_cast<double>(y) - y1;
        double v = a0 * std::exp(-(dx0 * dx0 + dy0 * dy0) / (2 * sigma * sigma)) +
                   a1 * std::exp(-(dx1 * dx1 + dy1 * dy1) / (2 * sigma * sigma)) + 0.15 * normal(rng);
        v = std::clamp(v, 0.0, 1.0);
        ds.pixels[(s * kSide + y) * kSide + x] = static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
    }
  }
  return ds;
}

Model make_mlp(std::uint64_t seed) {
  Prng rng(seed, derive_stream(0x31a));
  Model m;
  m.input_shape = {64};
  m.layers = {make_linear(rng, 64, 32, "fc0"), ReluLayer{0}, make_linear(rng, 32, 10, "fc1")};
  return m;
}

Model make_cnn(std::uint64_t seed) {
  Prng rng(seed, derive_stream(0xc22));
  Model m;
  m.input_shape = {1, 8, 8};
  m.layers = {make_conv(rng, 1, 8, "conv0"),  ReluLayer{0},   AvgPoolLayer{2, 2, 2},
              make_conv(rng, 8, 16, "conv1"), ReluLayer{1},   AvgPoolLayer{2, 2, 2},
              FlattenLayer{},                 make_linear(rng, 64, 10, "fc")};
  return m;
}

Model make_toy(std::uint64_t seed) {
  Prng rng(seed, derive_stream(0x70e));
  Model m;
  m.input_shape = {64};
  m.layers = {make_linear(rng, 64, 16, "fc0"), ReluLayer{0}, make_linear(rng, 16, 16, "fc1"),
              ReluLayer{1},                    make_linear(rng, 16, 10, "fc2")};
  return m;
}

Model make_model(const std::string& arch, std::uint64_t seed) {
  if (arch == "mlp") return make_mlp(seed);
  if (arch == "cnn") return make_cnn(seed);
  if (arch == "toy") return make_toy(seed);
  throw ConfigError("unknown architecture '" + arch + "' (expected mlp, cnn or toy)");
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Params {
  std::vector<double> w, b, vw, vb, gw, gb;
};

void backward_layer(const Layer& layer, Params* p, const Tensor& in, const Tensor& out_grad,
                    Tensor& in_grad) {
  const std::size_t batch = in.shape[0];
  in_grad = Tensor(in.shape);
  if (const auto* l = std::get_if<LinearLayer>(&layer)) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < l->out; ++o) {
        const double g = out_grad.data[b * l->out + o];
        if (g == 0.0) continue;
        p->gb[o] += g;
        for (std::size_t i = 0; i < l->in; ++i) {
          p->gw[o * l->in + i] += g * in.data[b * l->in + i];
          in_grad.data[b * l->in + i] += g * p->w[o * l->in + i];
        }
      }
    }
  } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
    const detail::ConvGeometry g{c->c_in, in.shape[2], in.shape[3], c->c_out, c->kh, c->kw, c->stride, c->pad};
    const std::size_t pixels = g.out_h() * g.out_w(), k = g.patch(), in_size = c->c_in * g.h * g.w;
    std::vector<double> cols, dcols;
    for (std::size_t b = 0; b < batch; ++b) {
      detail::im2col(in.data.data() + b * in_size, g, cols);
      dcols.assign(cols.size(), 0.0);
      const double* gb = out_grad.data.data() + b * c->c_out * pixels;
      for (std::size_t co = 0; co < c->c_out; ++co) {
        for (std::size_t px = 0; px < pixels; ++px) {
          const double gv = gb[co * pixels + px];
          if (gv == 0.0) continue;
          p->gb[co] += gv;
          for (std::size_t j = 0; j < k; ++j) {
            p->gw[co * k + j] += gv * cols[px * k + j];
            dcols[px * k + j] += gv * p->w[co * k + j];
          }
        }
      }
      // col2im
      double* dx = in_grad.data.data() + b * in_size;
      for (std::size_t oy = 0; oy < g.out_h(); ++oy) {
        for (std::size_t ox = 0; ox < g.out_w(); ++ox) {
          const double* row = dcols.data() + (oy * g.out_w() + ox) * k;
          for (std::size_t ch = 0; ch < g.c_in; ++ch) {
            for (std::size_t ky = 0; ky < g.kh; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
              for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                dx[(ch * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] +=
                    row[(ch * g.kh + ky) * g.kw + kx];
              }
            }
          }
        }
      }
    }
  } else if (const auto* a = std::get_if<AvgPoolLayer>(&layer)) {
    const detail::PoolGeometry g{in.shape[1], in.shape[2], in.shape[3], a->kh, a->kw, a->stride};
    const double inv = 1.0 / static_cast<double>(a->kh * a->kw);
    const std::size_t oh = g.out_h(), ow = g.out_w();
    for (std::size_t bc = 0; bc < batch * g.c; ++bc) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double gv = out_grad.data[(bc * oh + oy) * ow + ox] * inv;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              in_grad.data[(bc * g.h + oy * g.stride + ky) * g.w + ox * g.stride + kx] += gv;
            }
          }
        }
      }
    }
  } else if (std::holds_alternative<ReluLayer>(layer)) {
    for (std::size_t i = 0; i < in.size(); ++i) in_grad.data[i] = in.data[i] > 0.0 ? out_grad.data[i] : 0.0;
  } else {
    in_grad.data = out_grad.data;
  }
}

}  // namespace

double train(Model& model, const Dataset& data, const TrainOptions& opt) {
  model.validate();
  if (data.size() == 0 || opt.batch == 0) throw ConfigError("training needs data and a positive batch");
  const std::size_t L = model.layers.size();
  std::vector<Params> params(L);
  for (std::size_t i = 0; i < L; ++i) {
    auto load = [&](const std::vector<float>& w, const std::vector<float>& b) {
      params[i].w.assign(w.begin(), w.end());
      params[i].b.assign(b.begin(), b.end());
      params[i].vw.assign(w.size(), 0.0);
      params[i].vb.assign(b.size(), 0.0);
    };
    if (const auto* l = std::get_if<LinearLayer>(&model.layers[i])) load(l->w, l->b);
    if (const auto* c = std::get_if<Conv2dLayer>(&model.layers[i])) load(c->w, c->b);
  }
  auto sync = [&](std::size_t i) {
    auto store = [&](std::vector<float>& w, std::vector<float>& b) {
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<float>(params[i].w[j]);
      for (std::size_t j = 0; j < b.size(); ++j) b[j] = static_cast<float>(params[i].b[j]);
    };
    if (auto* l = std::get_if<LinearLayer>(&model.layers[i])) store(l->w, l->b);
    if (auto* c = std::get_if<Conv2dLayer>(&model.layers[i])) store(c->w, c->b);
  };

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Prng rng(opt.seed, derive_stream(0x7a1));
  const Dataset* src = &data;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
    const double lr = opt.lr * (epoch + 1 == opt.epochs ? 0.2 : 1.0);
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + opt.batch);
      Dataset mb;
      mb.rows = src->rows;
      mb.cols = src->cols;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t per = src->rows * src->cols;
        mb.pixels.insert(mb.pixels.end(), src->pixels.begin() + static_cast<std::ptrdiff_t>(order[j] * per),
                         src->pixels.begin() + static_cast<std::ptrdiff_t>((order[j] + 1) * per));
        mb.labels.push_back(src->labels[order[j]]);
      }
      std::vector<Tensor> acts{mb.batch(model.input_shape, 0, mb.size())};
      for (std::size_t i = 0; i < L; ++i) {
        const Layer& layer = model.layers[i];
        acts.push_back(std::holds_alternative<ReluLayer>(layer) ? relu_plain(acts.back())
                                                                : apply_layer(layer, acts.back()));
      }
      // softmax cross-entropy gradient
      Tensor grad = acts.back();
      const std::size_t n = mb.size(), classes = grad.size() / n;
      for (std::size_t b = 0; b < n; ++b) {
        double* row = grad.data.data() + b * classes;
        const double mx = *std::max_element(row, row + classes);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += (row[c] = std::exp(row[c] - mx));
        for (std::size_t c = 0; c < classes; ++c) row[c] /= z;
        row[mb.labels[b]] -= 1.0;
        for (std::size_t c = 0; c < classes; ++c) row[c] /= static_cast<double>(n);
      }
      for (std::size_t i = L; i-- > 0;) {
        Params& p = params[i];
        p.gw.assign(p.w.size(), 0.0);
        p.gb.assign(p.b.size(), 0.0);
        Tensor in_grad;
        backward_layer(model.layers[i], &p, acts[i], grad, in_grad);
        for (std::size_t j = 0; j < p.w.size(); ++j) {
          p.vw[j] = 0.9 * p.vw[j] - lr * p.gw[j];
          p.w[j] += p.vw[j];
        }
        for (std::size_t j = 0; j < p.b.size(); ++j) {
          p.vb[j] = 0.9 * p.vb[j] - lr * p.gb[j];
          p.b[j] += p.vb[j];
        }
        sync(i);
        grad = std::move(in_grad);
      }
    }
  }
  const Tensor logits = plain_forward(model, data.batch(model.input_shape, 0, data.size()));
  return accuracy(logits, data.batch_labels(0, data.size()));
}

DeskModel build_desk_model(const std::string& arch, std::uint64_t seed, int epochs, std::size_t n_train,
                           std::size_t n_val) {
  DeskModel d;
  d.model = make_model(arch, seed);
  d.train = gen_synthetic(derive_stream(seed, 1), n_train);
  d.val = gen_synthetic(derive_stream(seed, 2), n_val);
  TrainOptions opt;
  opt.epochs = epochs;
  opt.seed = seed;
  d.train_accuracy = train(d.model, d.train, opt);
  d.val_accuracy = accuracy(plain_forward(d.model, d.val.batch(d.model.input_shape, 0, d.val.size())),
                            d.val.batch_labels(0, d.val.size()));
  return d;
}

void save_desk_model(const DeskModel& desk, const std::filesystem::path& dir) {
  save_model(desk.model, dir);
  save_dataset(desk.train, dir / "train-images.idx", dir / "train-labels.idx");
  save_dataset(desk.val, dir / "val-images.idx", dir / "val-labels.idx");
}

}  // namespace redring

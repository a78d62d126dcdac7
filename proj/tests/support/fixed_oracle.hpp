#pragma once

// Plaintext fixed-point forward pass in integer arithmetic. Written with
// direct loops so it shares no kernel code with the library. Truncation is an
// exact floor; the MPC path differs by at most one ulp per truncation.

#include <cstdint>
#include <vector>

#include "redring/nn.hpp"
#include "redring/ring.hpp"

namespace redring::testing {

struct FixedTensor {
  Shape shape;  // batch first
  std::vector<std::int64_t> data;
};

inline std::int64_t fx(double v, const FixedPointConfig& fp) {
  return to_signed(encode_fixed_word(v, fp), fp.ring_bits);
}

inline std::int64_t floor_shift(__int128 v, int f) {
  const __int128 d = __int128{1} << f;
  __int128 q = v / d;
  if (v % d != 0 && v < 0) --q;
  return static_cast<std::int64_t>(q);
}

inline FixedTensor fx_encode(const Tensor& t, const FixedPointConfig& fp) {
  FixedTensor out{t.shape, std::vector<std::int64_t>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = fx(t.data[i], fp);
  return out;
}

inline Tensor fx_decode(const FixedTensor& t, const FixedPointConfig& fp) {
  Tensor out(t.shape);
  for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<double>(t.data[i]) / fp.scale();
  return out;
}

inline FixedTensor fx_layer(const Layer& layer, const FixedTensor& x, const FixedPointConfig& fp) {
  const int f = fp.frac_bits;
  const std::size_t n = x.shape[0];
  if (const auto* l = std::get_if<LinearLayer>(&layer)) {
    FixedTensor y{{n, l->out}, std::vector<std::int64_t>(n * l->out)};
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t o = 0; o < l->out; ++o) {
        __int128 acc = 0;
        for (std::size_t i = 0; i < l->in; ++i) acc += __int128{fx(l->w[o * l->in + i], fp)} * x.data[b * l->in + i];
        y.data[b * l->out + o] = floor_shift(acc, f) + fx(l->b[o], fp);
      }
    }
    return y;
  }
  if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
    const std::size_t h = x.shape[2], w = x.shape[3];
    const std::size_t oh = (h + 2 * c->pad - c->kh) / c->stride + 1, ow = (w + 2 * c->pad - c->kw) / c->stride + 1;
    FixedTensor y{{n, c->c_out, oh, ow}, std::vector<std::int64_t>(n * c->c_out * oh * ow)};
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t co = 0; co < c->c_out; ++co)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            __int128 acc = 0;
            for (std::size_t ci = 0; ci < c->c_in; ++ci)
              for (std::size_t ky = 0; ky < c->kh; ++ky)
                for (std::size_t kx = 0; kx < c->kw; ++kx) {
                  const long iy = static_cast<long>(oy * c->stride + ky) - static_cast<long>(c->pad);
                  const long ix = static_cast<long>(ox * c->stride + kx) - static_cast<long>(c->pad);
                  if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                  const double wv = c->w[((co * c->c_in + ci) * c->kh + ky) * c->kw + kx];
                  acc += __int128{fx(wv, fp)} *
                         x.data[((b * c->c_in + ci) * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
                }
            y.data[((b * c->c_out + co) * oh + oy) * ow + ox] = floor_shift(acc, f) + fx(c->b[co], fp);
          }
    return y;
  }
  if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
    const std::size_t ch = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t oh = (h - p->kh) / p->stride + 1, ow = (w - p->kw) / p->stride + 1;
    const std::int64_t inv = fx(1.0 / static_cast<double>(p->kh * p->kw), fp);
    FixedTensor y{{n, ch, oh, ow}, std::vector<std::int64_t>(n * ch * oh * ow)};
    for (std::size_t bc = 0; bc < n * ch; ++bc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          __int128 sum = 0;
          for (std::size_t ky = 0; ky < p->kh; ++ky)
            for (std::size_t kx = 0; kx < p->kw; ++kx) sum += x.data[(bc * h + oy * p->stride + ky) * w + ox * p->stride + kx];
          y.data[(bc * oh + oy) * ow + ox] = floor_shift(sum * inv, f);
        }
    return y;
  }
  if (std::holds_alternative<ReluLayer>(layer)) {
    FixedTensor y = x;
    for (auto& v : y.data) v = v > 0 ? v : 0;
    return y;
  }
  FixedTensor y = x;  // flatten
  std::size_t per = 1;
  for (std::size_t d = 1; d < x.shape.size(); ++d) per *= x.shape[d];
  y.shape = {n, per};
  return y;
}

// Output of every layer, in order.
inline std::vector<FixedTensor> fx_forward_all(const Model& model, const Tensor& input) {
  std::vector<FixedTensor> outs;
  FixedTensor cur = fx_encode(input, model.fixed_point);
  for (const Layer& layer : model.layers) {
    cur = fx_layer(layer, cur, model.fixed_point);
    outs.push_back(cur);
  }
  return outs;
}

}  // namespace redring::testing

#pragma once

// Layer arithmetic shared by the real-valued and the ring-valued paths. T is
// double or std::uint64_t (wrapping mod 2^64).

#include <cstddef>
#include <span>
#include <vector>

namespace redring::detail {

// y[b][o] = sum_i w[o][i] * x[b][i]
template <typename T>
void linear_kernel(std::span<const T> x, std::size_t batch, std::size_t in, std::size_t out,
                   std::span<const T> w, std::span<T> y) {
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xb = x.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const T* wo = w.data() + o * in;
      T acc{};
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xb[i];
      y[b * out + o] = acc;
    }
  }
}

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, kh, kw, stride, pad;
  std::size_t out_h() const { return (h + 2 * pad - kh) / stride + 1; }
  std::size_t out_w() const { return (w + 2 * pad - kw) / stride + 1; }
  std::size_t patch() const { return c_in * kh * kw; }
};

// Row p = output pixel, column j = (c, ky, kx); zero padding.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::vector<T>& cols) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.patch();
  cols.assign(oh * ow * k, T{});
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      T* row = cols.data() + (oy * ow + ox) * k;
      for (std::size_t c = 0; c < g.c_in; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            row[(c * g.kh + ky) * g.kw + kx] =
                x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// y[b][co][p] = sum_j w[co][j] * cols_b[p][j]
template <typename T>
void conv_kernel(std::span<const T> x, std::size_t batch, const ConvGeometry& g,
                 std::span<const T> w, std::span<T> y) {
  const std::size_t in_size = g.c_in * g.h * g.w;
  const std::size_t pixels = g.out_h() * g.out_w();
  const std::size_t k = g.patch();
  std::vector<T> cols;
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(x.data() + b * in_size, g, cols);
    T* yb = y.data() + b * g.c_out * pixels;
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const T* wc = w.data() + co * k;
      for (std::size_t p = 0; p < pixels; ++p) {
        const T* row = cols.data() + p * k;
        T acc{};
        for (std::size_t j = 0; j < k; ++j) acc += wc[j] * row[j];
        yb[co * pixels + p] = acc;
      }
    }
  }
}

struct PoolGeometry {
  std::size_t c, h, w, kh, kw, stride;
  std::size_t out_h() const { return (h - kh) / stride + 1; }
  std::size_t out_w() const { return (w - kw) / stride + 1; }
};

template <typename T>
void pool_sum_kernel(std::span<const T> x, std::size_t batch, const PoolGeometry& g,
                     std::span<T> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < g.c; ++c) {
      const T* xc = x.data() + (b * g.c + c) * g.h * g.w;
      T* yc = y.data() + (b * g.c + c) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc{};
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              acc += xc[(oy * g.stride + ky) * g.w + ox * g.stride + kx];
            }
          }
          yc[oy * ow + ox] = acc;
        }
      }
    }
  }
}

}  // namespace redring::detail

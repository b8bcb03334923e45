#pragma once

// Reference implementations used only by tests. They are written as plain
// loops over explicit indices and share no code path with the library kernels.

#include <cmath>
#include <functional>
#include <vector>

#include "fcndepth/kernels.hpp"
#include "fcndepth/losses.hpp"
#include "fcndepth/tensor.hpp"

namespace oracle {

using fcndepth::ConvKernel;
using fcndepth::Padding2D;
using fcndepth::Shape4;
using fcndepth::Tensor4;

/// Six nested loops over (n, oy, ox, co) x (ky, kx, ci), accumulated in double.
template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& in, const ConvKernel<Scalar>& k, int stride,
                       const Padding2D& pad) {
  const int oh = (in.h() + pad.top + pad.bottom - k.kh) / stride + 1;
  const int ow = (in.w() + pad.left + pad.right - k.kw) / stride + 1;
  Tensor4<Scalar> out(Shape4{in.n(), oh, ow, k.cout});
  for (int n = 0; n < in.n(); ++n)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int co = 0; co < k.cout; ++co) {
          double acc = k.bias ? static_cast<double>((*k.bias)[co]) : 0.0;
          for (int ky = 0; ky < k.kh; ++ky)
            for (int kx = 0; kx < k.kw; ++kx)
              for (int ci = 0; ci < k.cin; ++ci) {
                const int iy = oy * stride + ky - pad.top;
                const int ix = ox * stride + kx - pad.left;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += static_cast<double>(in(n, iy, ix, ci)) * k(ky, kx, ci, co);
              }
          out(n, oy, ox, co) = static_cast<Scalar>(acc);
        }
  return out;
}

/// Transposed convolution as a forward convolution: insert stride-1 zeros
/// between input cells, pad by k-1 on every side, correlate with the flipped
/// kernel, then keep the window of size in*stride starting at
/// floor(max(k - stride, 0) / 2).
template <typename Scalar>
Tensor4<Scalar> deconv2d_zero_stuffed(const Tensor4<Scalar>& in, const ConvKernel<Scalar>& k,
                                      int stride) {
  const int sh = (in.h() - 1) * stride + 1;
  const int sw = (in.w() - 1) * stride + 1;
  Tensor4<Scalar> stuffed(Shape4{in.n(), sh, sw, in.c()});
  for (int n = 0; n < in.n(); ++n)
    for (int y = 0; y < in.h(); ++y)
      for (int x = 0; x < in.w(); ++x)
        for (int c = 0; c < in.c(); ++c) stuffed(n, y * stride, x * stride, c) = in(n, y, x, c);

  ConvKernel<Scalar> flipped(k.kh, k.kw, k.cin, k.cout);
  for (int ky = 0; ky < k.kh; ++ky)
    for (int kx = 0; kx < k.kw; ++kx)
      for (int ci = 0; ci < k.cin; ++ci)
        for (int co = 0; co < k.cout; ++co)
          flipped(ky, kx, ci, co) = k(k.kh - 1 - ky, k.kw - 1 - kx, ci, co);

  const auto full = oracle::conv2d(stuffed, flipped, 1, Padding2D{k.kh - 1, k.kh - 1, k.kw - 1, k.kw - 1});
  const int oh = in.h() * stride, ow = in.w() * stride;
  const int off_y = std::max(k.kh - stride, 0) / 2;
  const int off_x = std::max(k.kw - stride, 0) / 2;
  Tensor4<Scalar> out(Shape4{in.n(), oh, ow, k.cout});
  for (int n = 0; n < in.n(); ++n)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int c = 0; c < k.cout; ++c) {
          const int fy = y + off_y, fx = x + off_x;
          double v = (fy < full.h() && fx < full.w()) ? full(n, fy, fx, c) : 0.0;
          if (k.bias) v += (*k.bias)[c];
          out(n, y, x, c) = static_cast<Scalar>(v);
        }
  return out;
}

template <typename Scalar>
double max_abs_diff(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

/// Central difference of f with respect to element i of x.
inline double central_difference(const std::function<double(const Tensor4<double>&)>& f,
                                 Tensor4<double> x, std::size_t i, double h) {
  const double orig = x[i];
  x[i] = orig + h;
  const double plus = f(x);
  x[i] = orig - h;
  const double minus = f(x);
  return (plus - minus) / (2.0 * h);
}

struct BruteMetrics {
  double mse = 0, rel = 0, d1 = 0, d2 = 0, d3 = 0;
};

/// Per-pixel loop over valid pixels with the metric definitions spelled out.
template <typename Scalar>
BruteMetrics metrics(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& gt) {
  BruteMetrics m;
  std::size_t count = 0, c1 = 0, c2 = 0, c3 = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double g = gt[i];
    const double d = pred[i];
    if (!(g > 0)) continue;
    ++count;
    m.mse += (g - d) * (g - d);
    m.rel += std::abs(g - d) / g;
    if (d > 0) {
      const double ratio = std::max(g / d, d / g);
      if (ratio < 1.25) ++c1;
      if (ratio < 1.25 * 1.25) ++c2;
      if (ratio < 1.25 * 1.25 * 1.25) ++c3;
    }
  }
  m.mse /= count;
  m.rel /= count;
  m.d1 = static_cast<double>(c1) / count;
  m.d2 = static_cast<double>(c2) / count;
  m.d3 = static_cast<double>(c3) / count;
  return m;
}

}  // namespace oracle

#pragma once

// Primitive NHWC kernels. "Convolution" is cross-correlation (no kernel flip).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "fcndepth/error.hpp"
#include "fcndepth/parallel.hpp"
#include "fcndepth/tensor.hpp"

namespace fcndepth {

enum class Padding { same, valid };

/// Explicit zero padding on each border.
struct Padding2D {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  friend bool operator==(const Padding2D&, const Padding2D&) = default;
};

enum class ResampleMode { maxpool2, nearest_up2, unpool_zero2 };

struct Extent1D {
  int out = 0;
  int before = 0;
  int after = 0;
};

/// "same": out = ceil(in / stride), padding split evenly with the odd pixel on
/// the bottom/right. "valid": out = floor((in - k) / stride) + 1, no padding.
inline Extent1D conv_extent(int in, int k, int stride, Padding padding) {
  if (stride < 1) throw ShapeError("stride must be positive");
  if (padding == Padding::same) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + k - in, 0);
    return {out, total / 2, total - total / 2};
  }
  if (in < k)
    throw ShapeError("valid convolution of extent " + std::to_string(in) + " with kernel " +
                     std::to_string(k) + " has zero-size output");
  return {(in - k) / stride + 1, 0, 0};
}

inline Shape4 conv2d_shape(const Shape4& in, int kh, int kw, int cout, int stride,
                           Padding padding) {
  return {in.n, conv_extent(in.h, kh, stride, padding).out,
          conv_extent(in.w, kw, stride, padding).out, cout};
}

inline Padding2D conv_padding(const Shape4& in, int kh, int kw, int stride, Padding padding) {
  const auto y = conv_extent(in.h, kh, stride, padding);
  const auto x = conv_extent(in.w, kw, stride, padding);
  return {y.before, y.after, x.before, x.after};
}

namespace detail {

inline std::atomic<std::uint64_t>& mac_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// Upper bound on floats held by one im2col tile.
inline constexpr std::size_t kPatchTileFloats = std::size_t{1} << 20;

inline void check_channels(int input_c, int kernel_cin, const char* op) {
  if (input_c != kernel_cin)
    throw ShapeError(std::string(op) + ": input has " + std::to_string(input_c) +
                     " channels, kernel expects " + std::to_string(kernel_cin));
}

}  // namespace detail

/// Counts multiply-accumulates issued by conv2d and deconv2d (process-wide)
/// between construction and count().
class MacScope {
 public:
  MacScope() : start_(detail::mac_counter().load()) {}
  std::uint64_t count() const { return detail::mac_counter().load() - start_; }

 private:
  std::uint64_t start_;
};

/// Convolution with explicit per-border zero padding.
template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& input, const ConvKernel<Scalar>& kernel, int stride,
                       const Padding2D& pad) {
  kernel.validate();
  detail::check_channels(input.c(), kernel.cin, "conv2d");
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  if (pad.top < 0 || pad.bottom < 0 || pad.left < 0 || pad.right < 0)
    throw ShapeError("conv2d: negative padding");
  const int padded_h = input.h() + pad.top + pad.bottom;
  const int padded_w = input.w() + pad.left + pad.right;
  if (padded_h < kernel.kh || padded_w < kernel.kw)
    throw ShapeError("conv2d: kernel larger than padded input, zero-size output");

  const Shape4 in = input.shape();
  const Shape4 out_shape{in.n, (padded_h - kernel.kh) / stride + 1,
                         (padded_w - kernel.kw) / stride + 1, kernel.cout};
  Tensor4<Scalar> output(out_shape);
  detail::mac_counter() += static_cast<std::uint64_t>(out_shape.n) * out_shape.h * out_shape.w *
                           kernel.weight_count();

  const int patch = kernel.kh * kernel.kw * kernel.cin;
  const int rows_per_tile = static_cast<int>(std::clamp<std::size_t>(
      detail::kPatchTileFloats / (static_cast<std::size_t>(patch) * out_shape.w), 1,
      static_cast<std::size_t>(out_shape.h)));
  const int tiles_per_image = (out_shape.h + rows_per_tile - 1) / rows_per_tile;
  const auto weights = kernel.matrix();
  auto out_pixels = output.pixels();

  parallel_for(static_cast<std::size_t>(in.n) * tiles_per_image, [&](std::size_t item) {
    const int n = static_cast<int>(item / tiles_per_image);
    const int y0 = static_cast<int>(item % tiles_per_image) * rows_per_tile;
    const int y1 = std::min(out_shape.h, y0 + rows_per_tile);
    const Eigen::Index rows = static_cast<Eigen::Index>(y1 - y0) * out_shape.w;

    RowMatrixX<Scalar> patches(rows, patch);
    const int span = kernel.kw * kernel.cin;
    for (int oy = y0; oy < y1; ++oy) {
      for (int ox = 0; ox < out_shape.w; ++ox) {
        Scalar* row = patches.data() + (static_cast<Eigen::Index>(oy - y0) * out_shape.w + ox) * patch;
        const int ix0 = ox * stride - pad.left;
        const int kx_lo = std::max(0, -ix0);
        const int kx_hi = std::min(kernel.kw, in.w - ix0);
        for (int ky = 0; ky < kernel.kh; ++ky) {
          Scalar* dst = row + ky * span;
          const int iy = oy * stride + ky - pad.top;
          if (iy < 0 || iy >= in.h || kx_lo >= kx_hi) {
            std::fill(dst, dst + span, Scalar(0));
            continue;
          }
          // Taps kx_lo..kx_hi-1 read adjacent input pixels, so one copy suffices.
          std::fill(dst, dst + kx_lo * kernel.cin, Scalar(0));
          std::memcpy(dst + kx_lo * kernel.cin, input.pixel(n, iy, ix0 + kx_lo),
                      sizeof(Scalar) * (kx_hi - kx_lo) * kernel.cin);
          std::fill(dst + kx_hi * kernel.cin, dst + span, Scalar(0));
        }
      }
    }
    const Eigen::Index first = (static_cast<Eigen::Index>(n) * out_shape.h + y0) * out_shape.w;
    auto block = out_pixels.middleRows(first, rows);
    block.noalias() = patches * weights;
    if (kernel.bias) block.rowwise() += kernel.bias->transpose();
  });
  return output;
}

template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& input, const ConvKernel<Scalar>& kernel, int stride,
                       Padding padding) {
  return conv2d(input, kernel, stride,
                conv_padding(input.shape(), kernel.kh, kernel.kw, stride, padding));
}

/// Offset of the kept window inside the uncropped transposed-convolution output
/// so that the result is exactly input * stride.
inline int deconv_crop_offset(int k, int stride) { return std::max(k - stride, 0) / 2; }

/// Transposed convolution (scatter-accumulate). Output extent is input * stride.
template <typename Scalar>
Tensor4<Scalar> deconv2d(const Tensor4<Scalar>& input, const ConvKernel<Scalar>& kernel,
                         int stride) {
  kernel.validate();
  detail::check_channels(input.c(), kernel.cin, "deconv2d");
  if (stride < 1) throw ShapeError("deconv2d: stride must be positive");

  const Shape4 in = input.shape();
  const Shape4 out_shape{in.n, in.h * stride, in.w * stride, kernel.cout};
  Tensor4<Scalar> output(out_shape);
  detail::mac_counter() += static_cast<std::uint64_t>(in.n) * in.h * in.w * kernel.weight_count();
  const int off_y = deconv_crop_offset(kernel.kh, stride);
  const int off_x = deconv_crop_offset(kernel.kw, stride);
  const int taps = kernel.kh * kernel.kw;

  // cin x (kh*kw*cout): one column block per tap.
  RowMatrixX<Scalar> spread(kernel.cin, static_cast<Eigen::Index>(taps) * kernel.cout);
  for (int t = 0; t < taps; ++t)
    for (int ci = 0; ci < kernel.cin; ++ci)
      for (int co = 0; co < kernel.cout; ++co)
        spread(ci, static_cast<Eigen::Index>(t) * kernel.cout + co) =
            kernel(t / kernel.kw, t % kernel.kw, ci, co);

  const std::size_t cols_per_row = static_cast<std::size_t>(in.w) * taps * kernel.cout;
  const int rows_per_tile = static_cast<int>(std::clamp<std::size_t>(
      detail::kPatchTileFloats / cols_per_row, 1, static_cast<std::size_t>(in.h)));
  const auto in_pixels = input.pixels();

  parallel_for(static_cast<std::size_t>(in.n), [&](std::size_t item) {
    const int n = static_cast<int>(item);
    for (int y0 = 0; y0 < in.h; y0 += rows_per_tile) {
      const int y1 = std::min(in.h, y0 + rows_per_tile);
      const Eigen::Index first = (static_cast<Eigen::Index>(n) * in.h + y0) * in.w;
      const RowMatrixX<Scalar> contrib =
          in_pixels.middleRows(first, static_cast<Eigen::Index>(y1 - y0) * in.w) * spread;
      for (int iy = y0; iy < y1; ++iy) {
        for (int ix = 0; ix < in.w; ++ix) {
          const Scalar* src =
              contrib.data() + (static_cast<Eigen::Index>(iy - y0) * in.w + ix) * taps * kernel.cout;
          for (int ky = 0; ky < kernel.kh; ++ky) {
            const int oy = iy * stride + ky - off_y;
            if (oy < 0 || oy >= out_shape.h) continue;
            for (int kx = 0; kx < kernel.kw; ++kx) {
              const int ox = ix * stride + kx - off_x;
              if (ox < 0 || ox >= out_shape.w) continue;
              Scalar* dst = output.pixel(n, oy, ox);
              const Scalar* tap = src + (ky * kernel.kw + kx) * kernel.cout;
              for (int co = 0; co < kernel.cout; ++co) dst[co] += tap[co];
            }
          }
        }
      }
    }
    if (kernel.bias) {
      const Eigen::Index first = static_cast<Eigen::Index>(n) * out_shape.h * out_shape.w;
      output.pixels().middleRows(first, static_cast<Eigen::Index>(out_shape.h) * out_shape.w)
          .rowwise() += kernel.bias->transpose();
    }
  });
  return output;
}

template <typename Scalar>
Tensor4<Scalar> relu(const Tensor4<Scalar>& input) {
  return Tensor4<Scalar>(input.shape(), input.vec().cwiseMax(Scalar(0)).eval());
}

template <typename Scalar>
Tensor4<Scalar> batchnorm_infer(const Tensor4<Scalar>& input,
                                const BatchNormParams<Scalar>& params) {
  params.validate();
  if (params.channels() != input.c())
    throw ShapeError("batchnorm: " + std::to_string(params.channels()) +
                     " parameter channels for a " + std::to_string(input.c()) +
                     "-channel input");
  const VectorX<Scalar> scale =
      params.gamma.cwiseQuotient((params.variance.array() + params.eps).sqrt().matrix());
  Tensor4<Scalar> output(input.shape());
  auto out = output.pixels();
  out = (input.pixels().rowwise() - params.mean.transpose()) * scale.asDiagonal();
  out.rowwise() += params.beta.transpose();
  return output;
}

inline Shape4 resample_shape(const Shape4& in, ResampleMode mode) {
  if (mode == ResampleMode::maxpool2) {
    if (in.h % 2 != 0 || in.w % 2 != 0)
      throw ShapeError("maxpool2 requires even height and width, got " + in.str());
    return {in.n, in.h / 2, in.w / 2, in.c};
  }
  return {in.n, in.h * 2, in.w * 2, in.c};
}

template <typename Scalar>
Tensor4<Scalar> resample(const Tensor4<Scalar>& input, ResampleMode mode) {
  const Shape4 in = input.shape();
  Tensor4<Scalar> output(resample_shape(in, mode));
  const Shape4 out = output.shape();
  for (int n = 0; n < out.n; ++n) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        for (int c = 0; c < out.c; ++c) {
          switch (mode) {
            case ResampleMode::maxpool2:
              output(n, y, x, c) =
                  std::max(std::max(input(n, 2 * y, 2 * x, c), input(n, 2 * y, 2 * x + 1, c)),
                           std::max(input(n, 2 * y + 1, 2 * x, c),
                                    input(n, 2 * y + 1, 2 * x + 1, c)));
              break;
            case ResampleMode::nearest_up2:
              output(n, y, x, c) = input(n, y / 2, x / 2, c);
              break;
            case ResampleMode::unpool_zero2:
              if (y % 2 == 0 && x % 2 == 0) output(n, y, x, c) = input(n, y / 2, x / 2, c);
              break;
          }
        }
      }
    }
  }
  return output;
}

/// Factorised 3x3: relu(conv(relu(conv(x, k31)), k13)), same padding, stride 1.
template <typename Scalar>
Tensor4<Scalar> nonbt_block(const Tensor4<Scalar>& input, const ConvKernel<Scalar>& k31,
                            const ConvKernel<Scalar>& k13) {
  if (k31.kh != 3 || k31.kw != 1) throw ShapeError("nonbt_block: first kernel must be 3x1");
  if (k13.kh != 1 || k13.kw != 3) throw ShapeError("nonbt_block: second kernel must be 1x3");
  if (k13.cin != k31.cout) throw ShapeError("nonbt_block: kernel channel chain is inconsistent");
  return relu(conv2d(relu(conv2d(input, k31, 1, Padding::same)), k13, 1, Padding::same));
}

template <typename Scalar>
Tensor4<Scalar> add(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  return Tensor4<Scalar>(a.shape(), (a.vec() + b.vec()).eval());
}

/// Keeps the top-left h x w window.
template <typename Scalar>
Tensor4<Scalar> crop(const Tensor4<Scalar>& input, int h, int w) {
  if (h < 1 || w < 1 || h > input.h() || w > input.w())
    throw ShapeError("crop: window " + std::to_string(h) + "x" + std::to_string(w) +
                     " does not fit " + input.shape().str());
  Tensor4<Scalar> output(Shape4{input.n(), h, w, input.c()});
  for (int n = 0; n < input.n(); ++n)
    for (int y = 0; y < h; ++y)
      std::memcpy(output.pixel(n, y, 0), input.pixel(n, y, 0),
                  sizeof(Scalar) * static_cast<std::size_t>(w) * input.c());
  return output;
}

}  // namespace fcndepth

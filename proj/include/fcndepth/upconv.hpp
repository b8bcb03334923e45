#pragma once

// Up-convolution decoder block: unpool (zero insertion) + 5x5 conv + BN + ReLU,
// and its interleaved form built from four small convolutions.
//
// Over a zero-stuffed grid only the taps whose row/column offset from the
// kernel centre has the same parity as the output cell contribute. Splitting
// the 25 taps by offset parity gives four dense kernels:
//
//   branch  output cell     taps (ky, kx)             size   padding t/b/l/r
//   k33     (even, even)    ({0,2,4}, {0,2,4})        3x3    1 1 1 1
//   k32     (even, odd)     ({0,2,4}, {1,3})          3x2    1 1 0 1
//   k23     (odd,  even)    ({1,3},   {0,2,4})        2x3    0 1 1 1
//   k22     (odd,  odd)     ({1,3},   {1,3})          2x2    0 1 0 1
//
// Dropout that follows the block during training is an inference no-op.

#include <array>
#include <cstdint>

#include "fcndepth/interleave.hpp"
#include "fcndepth/kernels.hpp"
#include "fcndepth/random.hpp"

namespace fcndepth {

template <typename Scalar>
struct UpConvWeights {
  ConvKernel<Scalar> full;  // 5x5
  BatchNormParams<Scalar> bn;
};

template <typename Scalar>
struct SplitUpConvWeights {
  ConvKernel<Scalar> k33;
  ConvKernel<Scalar> k32;
  ConvKernel<Scalar> k23;
  ConvKernel<Scalar> k22;
  BatchNormParams<Scalar> bn;
};

/// Zero padding for each branch, in a/b/c/d (k33, k32, k23, k22) order.
inline constexpr std::array<Padding2D, 4> kUpConvBranchPadding{{
    {1, 1, 1, 1},
    {1, 1, 0, 1},
    {0, 1, 1, 1},
    {0, 1, 0, 1},
}};

inline Shape4 upconv_output_shape(const Shape4& in, int cout) {
  return {in.n, 2 * in.h, 2 * in.w, cout};
}

/// Multiply-accumulates of the naive path: 25 taps over every cell of the
/// 2x-upsampled grid.
inline std::uint64_t upconv_naive_macs(const Shape4& in, int cout) {
  return static_cast<std::uint64_t>(in.n) * (2 * in.h) * (2 * in.w) * 25 * in.c * cout;
}

/// Multiply-accumulates of the interleaved path: 9+6+6+4 taps per input cell.
inline std::uint64_t upconv_fast_macs(const Shape4& in, int cout) {
  return static_cast<std::uint64_t>(in.n) * in.h * in.w * (9 + 6 + 6 + 4) * in.c * cout;
}

template <typename Scalar>
Tensor4<Scalar> upconv_block_naive(const Tensor4<Scalar>& input,
                                   const UpConvWeights<Scalar>& weights) {
  if (weights.full.kh != 5 || weights.full.kw != 5)
    throw ShapeError("upconv: kernel must be 5x5");
  if (input.c() != weights.full.cin)
    throw ShapeError("upconv: input has " + std::to_string(input.c()) +
                     " channels, kernel expects " + std::to_string(weights.full.cin));
  const auto unpooled = resample(input, ResampleMode::unpool_zero2);
  return relu(batchnorm_infer(conv2d(unpooled, weights.full, 1, Padding::same), weights.bn));
}

namespace detail {

template <typename Scalar>
ConvKernel<Scalar> gather_taps(const ConvKernel<Scalar>& full, int row_parity, int col_parity) {
  const int rows = row_parity == 0 ? 3 : 2;
  const int cols = col_parity == 0 ? 3 : 2;
  ConvKernel<Scalar> part(rows, cols, full.cin, full.cout, full.bias.has_value());
  for (int r = 0; r < rows; ++r)
    for (int s = 0; s < cols; ++s)
      for (int ci = 0; ci < full.cin; ++ci)
        for (int co = 0; co < full.cout; ++co)
          part(r, s, ci, co) = full(2 * r + row_parity, 2 * s + col_parity, ci, co);
  if (full.bias) part.bias = full.bias;
  return part;
}

}  // namespace detail

/// Rearranges a 5x5 up-convolution kernel into the four interleave branches.
/// A bias, if present, is copied to every branch.
template <typename Scalar>
SplitUpConvWeights<Scalar> split_weights_5x5(const UpConvWeights<Scalar>& weights) {
  const auto& full = weights.full;
  full.validate();
  if (full.kh != 5 || full.kw != 5)
    throw ShapeError("split_weights_5x5: kernel is " + std::to_string(full.kh) + "x" +
                     std::to_string(full.kw) + ", expected 5x5");
  return {detail::gather_taps(full, 0, 0), detail::gather_taps(full, 0, 1),
          detail::gather_taps(full, 1, 0), detail::gather_taps(full, 1, 1), weights.bn};
}

template <typename Scalar>
Tensor4<Scalar> upconv_block_fast(const Tensor4<Scalar>& input,
                                  const SplitUpConvWeights<Scalar>& weights) {
  const std::array<const ConvKernel<Scalar>*, 4> kernels{&weights.k33, &weights.k32,
                                                         &weights.k23, &weights.k22};
  const std::array<std::pair<int, int>, 4> extents{{{3, 3}, {3, 2}, {2, 3}, {2, 2}}};
  for (std::size_t b = 0; b < 4; ++b) {
    if (kernels[b]->kh != extents[b].first || kernels[b]->kw != extents[b].second)
      throw ShapeError("upconv_fast: branch kernel " + std::to_string(b) + " has wrong extent");
    if (kernels[b]->cin != input.c() || kernels[b]->cout != weights.k33.cout)
      throw ShapeError("upconv_fast: branch kernel channel mismatch");
  }
  std::array<Tensor4<Scalar>, 4> branches;
  for (std::size_t b = 0; b < 4; ++b)
    branches[b] = conv2d(input, *kernels[b], 1, kUpConvBranchPadding[b]);
  const auto merged =
      interleave4(InterleaveInputs<Scalar>{branches[0], branches[1], branches[2], branches[3]});
  return relu(batchnorm_infer(merged, weights.bn));
}

struct VerifyOptions {
  int cout = 0;  // 0: same as the input channel count
  bool zero_weights = false;
  /// Swaps two k33 taps after splitting; used as a negative control.
  bool corrupt_tap_mapping = false;
};

/// Builds random up-convolution weights and an input of `input_shape` from
/// `seed`, runs both paths and returns max |naive - fast|.
template <typename Scalar>
double verify_equivalence(const Shape4& input_shape, std::uint64_t seed,
                          const VerifyOptions& options = {}) {
  Rng rng(seed);
  const int cout = options.cout > 0 ? options.cout : input_shape.c;
  const auto input = random_tensor<Scalar>(input_shape, rng);
  UpConvWeights<Scalar> weights{ConvKernel<Scalar>(5, 5, input_shape.c, cout),
                                random_batchnorm<Scalar>(cout, rng)};
  if (!options.zero_weights) fill_uniform(weights.full.weights, rng, -1.0, 1.0);

  auto split = split_weights_5x5(weights);
  if (options.corrupt_tap_mapping) {
    for (int ci = 0; ci < split.k33.cin; ++ci)
      for (int co = 0; co < split.k33.cout; ++co)
        std::swap(split.k33(0, 0, ci, co), split.k33(2, 1, ci, co));
  }
  const auto naive = upconv_block_naive(input, weights);
  const auto fast = upconv_block_fast(input, split);
  if (naive.shape() != fast.shape()) throw ShapeError("upconv paths disagree on output shape");
  double worst = 0.0;
  for (std::size_t i = 0; i < naive.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(naive[i]) - static_cast<double>(fast[i])));
  return worst;
}

}  // namespace fcndepth

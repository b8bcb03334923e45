#pragma once

#include <array>
#include <cstring>

#include "fcndepth/error.hpp"
#include "fcndepth/parallel.hpp"
#include "fcndepth/tensor.hpp"

namespace fcndepth {

/// Four quarter-resolution maps. In the merged output, `a` fills the
/// (even row, even col) cells, `b` (even, odd), `c` (odd, even), `d` (odd, odd).
template <typename Scalar>
struct InterleaveInputs {
  const Tensor4<Scalar>& a;
  const Tensor4<Scalar>& b;
  const Tensor4<Scalar>& c;
  const Tensor4<Scalar>& d;

  Shape4 output_shape() const {
    const Shape4 s = a.shape();
    if (b.shape() != s || c.shape() != s || d.shape() != s)
      throw ShapeError("interleave: the four inputs must share one shape (" + a.shape().str() +
                       ", " + b.shape().str() + ", " + c.shape().str() + ", " +
                       d.shape().str() + ")");
    return {s.n, 2 * s.h, 2 * s.w, s.c};
  }
};

template <typename Scalar>
InterleaveInputs(const Tensor4<Scalar>&, const Tensor4<Scalar>&, const Tensor4<Scalar>&,
                 const Tensor4<Scalar>&) -> InterleaveInputs<Scalar>;

/// Single-pass interleave: every output element is written exactly once, with
/// no intermediate buffers. For flat output index i over (N, H, W, C):
///   n = i / (H*W*C), h = (i % (H*W*C)) / (W*C), w = (i % (W*C)) / C, c = i % C
///   src = (h % 2) * 2 + (w % 2)
///   index_in = n*H*W*C/4 + (h/2)*W*C/2 + (w/2)*C + c
/// The divisions are hoisted out of the inner loops.
template <typename Scalar>
Tensor4<Scalar> interleave4(const InterleaveInputs<Scalar>& in) {
  const Shape4 shape = in.output_shape();
  Tensor4<Scalar> out(shape);
  const std::size_t H = shape.h, W = shape.w, C = shape.c;
  const std::size_t row = W * C;
  const Scalar* sources[4] = {in.a.data(), in.b.data(), in.c.data(), in.d.data()};
  Scalar* dst = out.data();

  // One work item per output row.
  parallel_for(static_cast<std::size_t>(shape.n) * H, [&](std::size_t r) {
    const std::size_t n_in = r / H;
    const std::size_t h_in = r % H;
    const std::size_t base = n_in * H * W * C / 4 + (h_in / 2) * W * C / 2;
    const Scalar* even = sources[(h_in % 2) * 2];
    const Scalar* odd = sources[(h_in % 2) * 2 + 1];
    Scalar* out_row = dst + r * row;
    for (std::size_t w_in = 0; w_in < W; ++w_in) {
      const Scalar* src = (w_in % 2 == 0 ? even : odd) + base + (w_in / 2) * C;
      Scalar* o = out_row + w_in * C;
      for (std::size_t c_in = 0; c_in < C; ++c_in) o[c_in] = src[c_in];
    }
  });
  return out;
}

namespace detail {

template <typename Scalar>
Tensor4<Scalar> interleave_columns(const Tensor4<Scalar>& even, const Tensor4<Scalar>& odd) {
  const Shape4 s = even.shape();
  Tensor4<Scalar> out(Shape4{s.n, s.h, 2 * s.w, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        std::memcpy(out.pixel(n, y, 2 * x), even.pixel(n, y, x), sizeof(Scalar) * s.c);
        std::memcpy(out.pixel(n, y, 2 * x + 1), odd.pixel(n, y, x), sizeof(Scalar) * s.c);
      }
  return out;
}

template <typename Scalar>
Tensor4<Scalar> interleave_rows(const Tensor4<Scalar>& even, const Tensor4<Scalar>& odd) {
  const Shape4 s = even.shape();
  Tensor4<Scalar> out(Shape4{s.n, 2 * s.h, s.w, s.c});
  const std::size_t row = static_cast<std::size_t>(s.w) * s.c;
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y) {
      std::memcpy(out.pixel(n, 2 * y, 0), even.pixel(n, y, 0), sizeof(Scalar) * row);
      std::memcpy(out.pixel(n, 2 * y + 1, 0), odd.pixel(n, y, 0), sizeof(Scalar) * row);
    }
  return out;
}

}  // namespace detail

/// Three-step interleave: (a, b) along width, (c, d) along width, then the two
/// results along height. Same contract as interleave4.
template <typename Scalar>
Tensor4<Scalar> interleave4_reference(const InterleaveInputs<Scalar>& in) {
  in.output_shape();
  return detail::interleave_rows(detail::interleave_columns(in.a, in.b),
                                 detail::interleave_columns(in.c, in.d));
}

/// Inverse of interleave4: splits a map with even H, W into its four parity
/// classes {a, b, c, d}.
template <typename Scalar>
std::array<Tensor4<Scalar>, 4> deinterleave4(const Tensor4<Scalar>& merged) {
  const Shape4 s = merged.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0)
    throw ShapeError("deinterleave: height and width must be even, got " + s.str());
  const Shape4 q{s.n, s.h / 2, s.w / 2, s.c};
  std::array<Tensor4<Scalar>, 4> parts{Tensor4<Scalar>(q), Tensor4<Scalar>(q),
                                       Tensor4<Scalar>(q), Tensor4<Scalar>(q)};
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        std::memcpy(parts[(y % 2) * 2 + (x % 2)].pixel(n, y / 2, x / 2), merged.pixel(n, y, x),
                    sizeof(Scalar) * s.c);
  return parts;
}

}  // namespace fcndepth

#pragma once

#include <cstdint>
#include <random>

#include "fcndepth/tensor.hpp"

namespace fcndepth {

/// Seeded generator whose output sequence is identical on every platform.
/// std::uniform_real_distribution is implementation-defined, so the
/// conversion to floating point is done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

template <typename Scalar>
void fill_uniform(Tensor4<Scalar>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.uniform(lo, hi));
}

template <typename Scalar>
Tensor4<Scalar> random_tensor(const Shape4& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<Scalar> t(shape);
  fill_uniform(t, rng, lo, hi);
  return t;
}

template <typename Scalar>
void fill_uniform(VectorX<Scalar>& v, Rng& rng, double lo, double hi) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(rng.uniform(lo, hi));
}

template <typename Scalar>
ConvKernel<Scalar> random_kernel(int kh, int kw, int cin, int cout, Rng& rng,
                                 bool with_bias = false, double scale = 1.0) {
  ConvKernel<Scalar> k(kh, kw, cin, cout, with_bias);
  fill_uniform(k.weights, rng, -scale, scale);
  if (k.bias) fill_uniform(*k.bias, rng, -scale, scale);
  return k;
}

template <typename Scalar>
BatchNormParams<Scalar> random_batchnorm(int channels, Rng& rng) {
  BatchNormParams<Scalar> p(channels);
  fill_uniform(p.mean, rng, -0.1, 0.1);
  fill_uniform(p.variance, rng, 0.5, 1.5);
  fill_uniform(p.gamma, rng, 0.5, 1.5);
  fill_uniform(p.beta, rng, -0.1, 0.1);
  return p;
}

}  // namespace fcndepth

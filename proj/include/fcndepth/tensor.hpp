#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>

#include "fcndepth/error.hpp"

namespace fcndepth {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Extents of an (N, H, W, C) tensor.
struct Shape4 {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * h * w * c;
  }
  bool valid() const { return n >= 1 && h >= 1 && w >= 1 && c >= 1; }

  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" +
           std::to_string(c);
  }
};

inline std::ostream& operator<<(std::ostream& os, const Shape4& s) { return os << s.str(); }

/// Dense rank-4 tensor in (N, H, W, C) layout, row-major contiguous:
/// index = ((n*H + h)*W + w)*C + c.
template <typename Scalar>
class Tensor4 {
 public:
  using value_type = Scalar;

  Tensor4() : Tensor4(Shape4{}) {}

  explicit Tensor4(const Shape4& shape, Scalar fill = Scalar(0)) : shape_(shape) {
    if (!shape.valid()) throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
    data_ = VectorX<Scalar>::Constant(static_cast<Eigen::Index>(shape.count()), fill);
  }

  Tensor4(const Shape4& shape, VectorX<Scalar> data) : shape_(shape), data_(std::move(data)) {
    if (!shape.valid()) throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
    if (static_cast<std::size_t>(data_.size()) != shape.count())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape.str());
  }

  static Tensor4 zeros(const Shape4& shape) { return Tensor4(shape); }

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  int c() const { return shape_.c; }
  std::size_t size() const { return shape_.count(); }

  std::size_t index(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }

  Scalar& operator()(int n, int h, int w, int c) { return data_[index(n, h, w, c)]; }
  Scalar operator()(int n, int h, int w, int c) const { return data_[index(n, h, w, c)]; }

  /// Pointer to the C channel values of one pixel.
  Scalar* pixel(int n, int h, int w) { return data_.data() + index(n, h, w, 0); }
  const Scalar* pixel(int n, int h, int w) const { return data_.data() + index(n, h, w, 0); }

  Scalar& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }
  Scalar operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  VectorX<Scalar>& vec() { return data_; }
  const VectorX<Scalar>& vec() const { return data_; }

  /// View as an (N*H*W) x C matrix: one row per pixel.
  Eigen::Map<RowMatrixX<Scalar>> pixels() {
    return {data_.data(), static_cast<Eigen::Index>(shape_.n) * shape_.h * shape_.w, shape_.c};
  }
  Eigen::Map<const RowMatrixX<Scalar>> pixels() const {
    return {data_.data(), static_cast<Eigen::Index>(shape_.n) * shape_.h * shape_.w, shape_.c};
  }

  template <typename Other>
  Tensor4<Other> cast() const {
    return Tensor4<Other>(shape_, data_.template cast<Other>().eval());
  }

  friend bool operator==(const Tensor4& a, const Tensor4& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape4 shape_;
  VectorX<Scalar> data_;
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

/// Convolution weights in (kh, kw, cin, cout) order plus an optional bias.
template <typename Scalar>
struct ConvKernel {
  int kh = 1;
  int kw = 1;
  int cin = 1;
  int cout = 1;
  VectorX<Scalar> weights;
  std::optional<VectorX<Scalar>> bias;

  ConvKernel() : weights(VectorX<Scalar>::Zero(1)) {}

  ConvKernel(int kh_, int kw_, int cin_, int cout_, bool with_bias = false)
      : kh(kh_), kw(kw_), cin(cin_), cout(cout_) {
    if (kh < 1 || kw < 1 || cin < 1 || cout < 1)
      throw ShapeError("kernel extents must be >= 1");
    weights = VectorX<Scalar>::Zero(static_cast<Eigen::Index>(weight_count()));
    if (with_bias) bias = VectorX<Scalar>::Zero(cout);
  }

  std::size_t weight_count() const { return static_cast<std::size_t>(kh) * kw * cin * cout; }

  std::size_t index(int y, int x, int ci, int co) const {
    return ((static_cast<std::size_t>(y) * kw + x) * cin + ci) * cout + co;
  }
  Scalar& operator()(int y, int x, int ci, int co) {
    return weights[static_cast<Eigen::Index>(index(y, x, ci, co))];
  }
  Scalar operator()(int y, int x, int ci, int co) const {
    return weights[static_cast<Eigen::Index>(index(y, x, ci, co))];
  }

  /// (kh*kw*cin) x cout view, matching an im2col patch row.
  Eigen::Map<const RowMatrixX<Scalar>> matrix() const {
    return {weights.data(), static_cast<Eigen::Index>(kh) * kw * cin, cout};
  }

  void validate() const {
    if (kh < 1 || kw < 1 || cin < 1 || cout < 1)
      throw ShapeError("kernel extents must be >= 1");
    if (static_cast<std::size_t>(weights.size()) != weight_count())
      throw ShapeError("kernel weight count does not match extents");
    if (bias && bias->size() != cout) throw ShapeError("kernel bias length must equal cout");
  }

  template <typename Other>
  ConvKernel<Other> cast() const {
    ConvKernel<Other> k(kh, kw, cin, cout);
    k.weights = weights.template cast<Other>();
    if (bias) k.bias = bias->template cast<Other>().eval();
    return k;
  }

  friend bool operator==(const ConvKernel& a, const ConvKernel& b) {
    return a.kh == b.kh && a.kw == b.kw && a.cin == b.cin && a.cout == b.cout &&
           a.weights == b.weights && a.bias == b.bias;
  }
};

/// Inference-time batch normalisation statistics and affine parameters.
template <typename Scalar>
struct BatchNormParams {
  VectorX<Scalar> mean;
  VectorX<Scalar> variance;
  VectorX<Scalar> gamma;
  VectorX<Scalar> beta;
  Scalar eps = Scalar(1e-5);

  BatchNormParams() = default;

  /// Identity transform for `channels` channels (apart from eps).
  explicit BatchNormParams(int channels, Scalar eps_ = Scalar(1e-5))
      : mean(VectorX<Scalar>::Zero(channels)),
        variance(VectorX<Scalar>::Ones(channels)),
        gamma(VectorX<Scalar>::Ones(channels)),
        beta(VectorX<Scalar>::Zero(channels)),
        eps(eps_) {}

  int channels() const { return static_cast<int>(mean.size()); }

  void validate() const {
    const auto c = mean.size();
    if (c < 1 || variance.size() != c || gamma.size() != c || beta.size() != c)
      throw ShapeError("batch-norm parameter vectors must share one nonzero length");
    if ((variance.array() < Scalar(0)).any())
      throw ShapeError("batch-norm variance must be nonnegative");
    if (!(eps >= Scalar(0))) throw ShapeError("batch-norm eps must be nonnegative");
  }

  template <typename Other>
  BatchNormParams<Other> cast() const {
    BatchNormParams<Other> p;
    p.mean = mean.template cast<Other>();
    p.variance = variance.template cast<Other>();
    p.gamma = gamma.template cast<Other>();
    p.beta = beta.template cast<Other>();
    p.eps = static_cast<Other>(eps);
    return p;
  }

  friend bool operator==(const BatchNormParams& a, const BatchNormParams& b) {
    return a.mean == b.mean && a.variance == b.variance && a.gamma == b.gamma &&
           a.beta == b.beta && a.eps == b.eps;
  }
};

}  // namespace fcndepth

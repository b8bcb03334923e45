#pragma once

// Depth losses with analytic gradients w.r.t. the prediction, the adaptive
// BerHu threshold controller, and the evaluation metrics.
//
// Pixels whose ground truth is not strictly positive are excluded from every
// sum; means are taken over the valid pixels only. All reductions run in
// double precision in index order.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fcndepth/error.hpp"
#include "fcndepth/tensor.hpp"

namespace fcndepth {

/// Prediction D and ground truth D* in metres, both (N, H, W, 1).
template <typename Scalar>
struct DepthPair {
  const Tensor4<Scalar>& prediction;
  const Tensor4<Scalar>& ground_truth;

  void validate() const {
    if (prediction.shape() != ground_truth.shape())
      throw ShapeError("depth pair: prediction " + prediction.shape().str() +
                       " and ground truth " + ground_truth.shape().str() + " differ");
  }
  bool valid(std::size_t i) const { return ground_truth[i] > Scalar(0); }

  std::size_t valid_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) count += valid(i) ? 1 : 0;
    return count;
  }
};

template <typename Scalar>
DepthPair(const Tensor4<Scalar>&, const Tensor4<Scalar>&) -> DepthPair<Scalar>;

struct LossParams {
  double alpha1 = 1.0;
  double alpha2 = 2.0;
};

template <typename Scalar>
struct LossResult {
  double value = 0.0;
  Tensor4<Scalar> grad;
};

namespace detail {

template <typename Scalar>
std::size_t checked_valid_count(const DepthPair<Scalar>& pair) {
  pair.validate();
  const std::size_t count = pair.valid_count();
  if (count == 0) throw Error("depth pair has no valid ground-truth pixels");
  return count;
}

}  // namespace detail

/// alpha1 * mean((D* - D)^2) + alpha2 * mean((1 - D / D*)^2).
template <typename Scalar>
LossResult<Scalar> mse_rel_loss(const DepthPair<Scalar>& pair, const LossParams& params = {}) {
  if (params.alpha1 < 0 || params.alpha2 < 0 || (params.alpha1 == 0 && params.alpha2 == 0))
    throw Error("mse_rel_loss: alphas must be nonnegative and not both zero");
  const double m = static_cast<double>(detail::checked_valid_count(pair));
  LossResult<Scalar> out{0.0, Tensor4<Scalar>(pair.prediction.shape())};
  double sq = 0.0;
  double rel = 0.0;
  for (std::size_t i = 0; i < pair.prediction.size(); ++i) {
    if (!pair.valid(i)) continue;
    const double d = pair.prediction[i];
    const double g = pair.ground_truth[i];
    const double e = g - d;
    const double r = 1.0 - d / g;
    sq += e * e;
    rel += r * r;
    out.grad[i] = static_cast<Scalar>((-2.0 * params.alpha1 * e - 2.0 * params.alpha2 * r / g) / m);
  }
  out.value = params.alpha1 * sq / m + params.alpha2 * rel / m;
  return out;
}

/// Per-pixel reverse Huber: |e| below k, (e^2 + k^2) / (2k) at or above.
inline double berhu_pixel(double error, double k) {
  const double a = std::abs(error);
  return a < k ? a : (error * error + k * k) / (2.0 * k);
}

/// d berhu_pixel / d prediction, with error = D* - D; 0 at error == 0.
inline double berhu_pixel_grad(double error, double k) {
  if (std::abs(error) < k) return error > 0 ? -1.0 : (error < 0 ? 1.0 : 0.0);
  return -error / k;
}

template <typename Scalar>
LossResult<Scalar> berhu_loss(const DepthPair<Scalar>& pair, double k) {
  if (!(k > 0)) throw Error("berhu_loss: threshold k must be positive");
  const double m = static_cast<double>(detail::checked_valid_count(pair));
  LossResult<Scalar> out{0.0, Tensor4<Scalar>(pair.prediction.shape())};
  double sum = 0.0;
  for (std::size_t i = 0; i < pair.prediction.size(); ++i) {
    if (!pair.valid(i)) continue;
    const double e = static_cast<double>(pair.ground_truth[i]) - pair.prediction[i];
    sum += berhu_pixel(e, k);
    out.grad[i] = static_cast<Scalar>(berhu_pixel_grad(e, k) / m);
  }
  out.value = sum / m;
  return out;
}

/// Threshold state of the adaptive BerHu loss.
struct AdaptiveBerHuState {
  double k = 1.0;      // metres
  double delta = 1.0;  // band half-width, metres
  double lr = 0.01;

  void validate() const {
    if (!(k > 0 && delta > 0 && lr > 0))
      throw Error("adaptive BerHu state requires k, delta, lr > 0");
  }
};

template <typename Scalar>
struct AdaptiveBerHuStep {
  double value = 0.0;
  Tensor4<Scalar> grad;
  AdaptiveBerHuState next;
};

/// BerHu at the current k, then moves k by lr*delta towards whichever
/// ground-truth depth band, [k - delta, k] or [k, k + delta], has the larger
/// mean per-pixel BerHu. Ties and empty bands leave k unchanged. A downward
/// step that would reach zero halves k instead.
template <typename Scalar>
AdaptiveBerHuStep<Scalar> aberhu_step(const DepthPair<Scalar>& pair,
                                      const AdaptiveBerHuState& state) {
  state.validate();
  auto loss = berhu_loss(pair, state.k);
  double low_sum = 0.0, high_sum = 0.0;
  std::size_t low_n = 0, high_n = 0;
  for (std::size_t i = 0; i < pair.prediction.size(); ++i) {
    if (!pair.valid(i)) continue;
    const double g = pair.ground_truth[i];
    const double l = berhu_pixel(g - static_cast<double>(pair.prediction[i]), state.k);
    if (g >= state.k - state.delta && g <= state.k) {
      low_sum += l;
      ++low_n;
    }
    if (g >= state.k && g <= state.k + state.delta) {
      high_sum += l;
      ++high_n;
    }
  }
  AdaptiveBerHuState next = state;
  if (low_n > 0 && high_n > 0) {
    const double low = low_sum / static_cast<double>(low_n);
    const double high = high_sum / static_cast<double>(high_n);
    const double step = state.lr * state.delta;
    if (high > low) {
      next.k = state.k + step;
    } else if (high < low) {
      next.k = state.k - step > 0 ? state.k - step : state.k / 2;
    }
  }
  return {loss.value, std::move(loss.grad), next};
}

/// Error metrics; rel is the mean absolute relative error |D* - D| / D*.
struct MetricsReport {
  double mse = 0.0;
  double rel = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t pixels = 0;
};

inline constexpr double kDeltaBase = 1.25;

/// Streaming accumulator so metrics can be pooled over many pairs.
class MetricsAccumulator {
 public:
  template <typename Scalar>
  void add(const DepthPair<Scalar>& pair) {
    pair.validate();
    for (std::size_t i = 0; i < pair.prediction.size(); ++i) {
      if (!pair.valid(i)) continue;
      add_pixel(pair.prediction[i], pair.ground_truth[i]);
    }
  }

  void add_pixel(double d, double g) {
    const double e = g - d;
    sq_ += e * e;
    rel_ += std::abs(e) / g;
    if (d > 0) {
      const double ratio = std::max(g / d, d / g);
      hits_[0] += ratio < kDeltaBase ? 1 : 0;
      hits_[1] += ratio < kDeltaBase * kDeltaBase ? 1 : 0;
      hits_[2] += ratio < kDeltaBase * kDeltaBase * kDeltaBase ? 1 : 0;
    }
    ++count_;
  }

  std::size_t count() const { return count_; }

  MetricsReport report() const {
    if (count_ == 0) throw Error("metrics: no valid ground-truth pixels");
    const double m = static_cast<double>(count_);
    return {sq_ / m, rel_ / m, static_cast<double>(hits_[0]) / m,
            static_cast<double>(hits_[1]) / m, static_cast<double>(hits_[2]) / m, count_};
  }

 private:
  double sq_ = 0.0;
  double rel_ = 0.0;
  std::size_t hits_[3] = {0, 0, 0};
  std::size_t count_ = 0;
};

template <typename Scalar>
MetricsReport compute_metrics(const DepthPair<Scalar>& pair) {
  MetricsAccumulator acc;
  acc.add(pair);
  return acc.report();
}

}  // namespace fcndepth

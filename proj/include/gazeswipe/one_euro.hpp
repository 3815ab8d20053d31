#pragma once

#include <cmath>
#include <numbers>
#include <optional>

#include "gazeswipe/errors.hpp"
#include "gazeswipe/types.hpp"

namespace gazeswipe {

struct OneEuroParams {
  double min_cutoff_hz = 1.0;
  double beta = 0.007;
  double d_cutoff_hz = 1.0;
};

/// Speed-adaptive low-pass filter for one scalar channel.
///
/// The derivative is estimated from consecutive raw samples, smoothed with
/// d_cutoff, and raises the value cutoff to min_cutoff + beta * |d|.
template <typename Scalar = double>
class OneEuroFilter {
 public:
  explicit OneEuroFilter(OneEuroParams params = {}) : params_(params) {
    if (!(params.min_cutoff_hz > 0.0) || !(params.d_cutoff_hz > 0.0) || !(params.beta >= 0.0)) {
      throw InvalidInput("one-euro: cutoffs must be positive and beta nonnegative");
    }
  }

  Scalar step(Scalar value, double timestamp_s) {
    if (!std::isfinite(value) || !std::isfinite(timestamp_s)) {
      throw InvalidInput("one-euro: non-finite sample");
    }
    if (!last_t_) {
      last_raw_ = value;
      last_filtered_ = value;
      last_derivative_ = Scalar(0);
      last_t_ = timestamp_s;
      return value;
    }
    if (!(timestamp_s > *last_t_)) throw ProtocolError("one-euro: timestamps must strictly increase");

    const double dt = timestamp_s - *last_t_;
    const Scalar derivative = (value - last_raw_) / dt;
    last_derivative_ += alpha(params_.d_cutoff_hz, dt) * (derivative - last_derivative_);
    const double cutoff = params_.min_cutoff_hz + params_.beta * std::abs(last_derivative_);
    last_filtered_ += alpha(cutoff, dt) * (value - last_filtered_);
    last_raw_ = value;
    last_t_ = timestamp_s;
    return last_filtered_;
  }

  void reset() { last_t_.reset(); }
  bool initialized() const { return last_t_.has_value(); }
  const OneEuroParams& params() const { return params_; }

 private:
  static Scalar alpha(double cutoff_hz, double dt) {
    const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
    return Scalar(1.0 / (1.0 + tau / dt));
  }

  OneEuroParams params_;
  std::optional<double> last_t_;
  Scalar last_raw_{};
  Scalar last_filtered_{};
  Scalar last_derivative_{};
};

/// Independent per-axis filters over a 2D point.
template <typename Scalar = double>
class PointFilter {
 public:
  explicit PointFilter(OneEuroParams params = {}) : x_(params), y_(params) {}

  Vector2<Scalar> step(const Vector2<Scalar>& p, double timestamp_s) {
    if (!p.allFinite()) throw InvalidInput("one-euro: non-finite sample");
    const Scalar fx = x_.step(p.x(), timestamp_s);
    const Scalar fy = y_.step(p.y(), timestamp_s);
    return Vector2<Scalar>(fx, fy);
  }

  void reset() {
    x_.reset();
    y_.reset();
  }

 private:
  OneEuroFilter<Scalar> x_;
  OneEuroFilter<Scalar> y_;
};

}  // namespace gazeswipe

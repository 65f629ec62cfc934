#pragma once

// RSSI smoothing with a two-state [rssi, rssi_rate] linear Kalman filter.
//
//   x_i = F x_{i-1} + w,  w ~ N(0, Q),   F = [[1, dt], [0, 1]]
//   z_i = H x_i + v,      v ~ N(0, R),   H = [1, 0]
//
// The dynamic variant re-estimates Q before every prediction as
// q_scale * var(window) * I, where the window holds the most recent raw
// measurements (population variance).

#include <cstddef>
#include <deque>
#include <optional>

#include <Eigen/Core>

#include "bleloc/model.hpp"

namespace bleloc::filter {

struct KalmanParams {
  double dt = 0.2;
  Eigen::Matrix2d F;
  Eigen::RowVector2d H;
  Eigen::Matrix2d Q;
  double R = 0.10;
  Eigen::Matrix2d P0;
};

/// dt = 0.2, P0 = 100 I, Q = 0.001 I, R = 0.10.
KalmanParams default_params();

/// Scalars expand to scaled identities; F and H take their canonical form.
/// Throws InvalidParams when the result fails validate().
KalmanParams make_params(double dt, double p0, double q, double r);

/// Q, P0 symmetric PSD, R > 0, everything finite.
void validate(const KalmanParams& params);

struct KalmanState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  Eigen::Vector2d last_gain = Eigen::Vector2d::Zero();
};

KalmanState initial_state(const Eigen::Vector2d& x0, const KalmanParams& params);

KalmanState predict(const KalmanState& state, const KalmanParams& params);

/// Expects `state` to be a prediction. Sets last_gain.
KalmanState update(const KalmanState& state, double z, const KalmanParams& params);

/// Sliding set of the most recent raw RSSI values, oldest first.
class RssiWindow {
 public:
  /// Throws InvalidParams when capacity < 2.
  explicit RssiWindow(std::size_t capacity);

  /// Drops the oldest value first when full.
  void push(double value);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::deque<double>& values() const noexcept { return values_; }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

RssiWindow window_push(RssiWindow window, double value);

/// Population variance. Throws InsufficientSamples below two values.
double window_variance(const RssiWindow& window);

/// One filter per beacon stream. Not thread-safe; move it, don't share it.
class RssiKalmanFilter {
 public:
  explicit RssiKalmanFilter(KalmanParams params, std::optional<Eigen::Vector2d> x0 = std::nullopt);

  /// One predict + update. The first call seeds the state from `z` unless an
  /// explicit initial state was given.
  double step(double z);

  const KalmanState& state() const noexcept { return state_; }
  const KalmanParams& params() const noexcept { return params_; }

 protected:
  KalmanParams params_;
  std::optional<Eigen::Vector2d> x0_;
  KalmanState state_;
  bool started_ = false;
};

/// Static-Q filter whose Q is replaced from the window before each prediction.
class DynamicRssiKalmanFilter {
 public:
  DynamicRssiKalmanFilter(KalmanParams params, std::size_t window_n, double q_scale);

  double step(double z);

  const KalmanState& state() const noexcept { return state_; }
  const RssiWindow& window() const noexcept { return window_; }
  /// Q used for the most recent prediction.
  const Eigen::Matrix2d& current_q() const noexcept { return current_q_; }

 private:
  KalmanParams params_;
  RssiWindow window_;
  double q_scale_;
  KalmanState state_;
  Eigen::Matrix2d current_q_;
  bool started_ = false;
};

struct FilterInit {
  // nullopt: seed from the first sample as [z0, 0].
  std::optional<Eigen::Vector2d> x0;

  static FilterInit first_sample() { return {}; }
  static FilterInit explicit_state(double rssi_dbm, double rate) {
    return {Eigen::Vector2d(rssi_dbm, rate)};
  }
};

/// Filters every beacon stream independently, in timestamp order. The output
/// keeps timestamps, ids, channels and tx power; rssi is the filtered level.
/// Throws EmptyTrace for an empty trace.
Trace smooth_trace(const Trace& trace, const KalmanParams& params,
                   FilterInit init = FilterInit::first_sample());

/// Dynamic-Q variant. Throws InvalidParams for window_n < 2 or q_scale <= 0 and
/// InsufficientSamples when a beacon stream has fewer than two samples.
Trace smooth_trace_dynamic(const Trace& trace, const KalmanParams& params, std::size_t window_n,
                           double q_scale);

inline constexpr std::size_t kDefaultWindowN = 10;
inline constexpr double kDefaultQScale = 1.0;

}  // namespace bleloc::filter

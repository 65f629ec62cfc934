#include "bleloc/filter.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "bleloc/error.hpp"

namespace bleloc::filter {

namespace {

bool symmetric_psd(const Eigen::Matrix2d& m) {
  if (!m.allFinite()) return false;
  if (std::abs(m(0, 1) - m(1, 0)) > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  // 2x2 symmetric: PSD iff diagonal >= 0 and determinant >= 0.
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) >= 0.0 && m(1, 1) >= 0.0 && det >= -1e-12 * std::max(1.0, m.squaredNorm());
}

Eigen::Matrix2d symmetrize(const Eigen::Matrix2d& m) { return 0.5 * (m + m.transpose()); }

double clamp_rssi(double v) { return std::clamp(v, kRssiFloorDbm, kRssiCeilDbm); }

Metadata params_metadata(Metadata metadata, const KalmanParams& p) {
  metadata["filter.dt"] = fmt::format("{}", p.dt);
  metadata["filter.p0"] = fmt::format("{}", p.P0(0, 0));
  metadata["filter.q"] = fmt::format("{}", p.Q(0, 0));
  metadata["filter.r"] = fmt::format("{}", p.R);
  return metadata;
}

// Runs `make_filter()` once per beacon stream and writes filtered levels back
// into a copy of the samples.
template <typename MakeFilter>
Trace run_per_beacon(const Trace& trace, MakeFilter make_filter, Metadata metadata) {
  using FilterT = decltype(make_filter());
  std::map<std::string, FilterT> filters;
  std::vector<RssiSample> out = trace.samples();
  for (auto& s : out) {
    auto it = filters.find(s.beacon_id);
    if (it == filters.end()) it = filters.emplace(s.beacon_id, make_filter()).first;
    s.rssi_dbm = clamp_rssi(it->second.step(s.rssi_dbm));
  }
  return Trace(std::move(out), std::move(metadata));
}

}  // namespace

KalmanParams default_params() { return make_params(0.2, 100.0, 0.001, 0.10); }

KalmanParams make_params(double dt, double p0, double q, double r) {
  KalmanParams p;
  p.dt = dt;
  p.F << 1.0, dt, 0.0, 1.0;
  p.H << 1.0, 0.0;
  p.Q = q * Eigen::Matrix2d::Identity();
  p.R = r;
  p.P0 = p0 * Eigen::Matrix2d::Identity();
  validate(p);
  return p;
}

void validate(const KalmanParams& p) {
  if (!std::isfinite(p.dt) || !p.F.allFinite() || !p.H.allFinite()) {
    throw Error(ErrorCode::InvalidParams, "non-finite dt, F or H");
  }
  if (!symmetric_psd(p.Q)) throw Error(ErrorCode::InvalidParams, "Q must be symmetric PSD");
  if (!symmetric_psd(p.P0)) throw Error(ErrorCode::InvalidParams, "P0 must be symmetric PSD");
  if (!(std::isfinite(p.R) && p.R > 0.0)) {
    throw Error(ErrorCode::InvalidParams, fmt::format("R must be > 0, got {}", p.R));
  }
}

KalmanState initial_state(const Eigen::Vector2d& x0, const KalmanParams& params) {
  KalmanState s;
  s.x = x0;
  s.P = params.P0;
  return s;
}

KalmanState predict(const KalmanState& state, const KalmanParams& params) {
  KalmanState out = state;
  out.x = params.F * state.x;
  out.P = symmetrize(params.F * state.P * params.F.transpose() + params.Q);
  return out;
}

KalmanState update(const KalmanState& state, double z, const KalmanParams& params) {
  const Eigen::Vector2d pht = state.P * params.H.transpose();
  const double innovation_var = params.H * pht + params.R;
  const Eigen::Vector2d gain = pht / innovation_var;
  const double innovation = z - params.H * state.x;

  KalmanState out;
  out.x = state.x + gain * innovation;
  out.P = symmetrize((Eigen::Matrix2d::Identity() - gain * params.H) * state.P);
  out.last_gain = gain;
  return out;
}

RssiWindow::RssiWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 2) {
    throw Error(ErrorCode::InvalidParams, fmt::format("window capacity must be >= 2, got {}", capacity));
  }
}

void RssiWindow::push(double value) {
  if (values_.size() == capacity_) values_.pop_front();
  values_.push_back(value);
}

RssiWindow window_push(RssiWindow window, double value) {
  window.push(value);
  return window;
}

double window_variance(const RssiWindow& window) {
  const auto& v = window.values();
  if (v.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples,
                fmt::format("variance needs at least 2 values, window holds {}", v.size()));
  }
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

RssiKalmanFilter::RssiKalmanFilter(KalmanParams params, std::optional<Eigen::Vector2d> x0)
    : params_(std::move(params)), x0_(std::move(x0)) {
  validate(params_);
}

double RssiKalmanFilter::step(double z) {
  if (!started_) {
    state_ = initial_state(x0_.value_or(Eigen::Vector2d(z, 0.0)), params_);
    started_ = true;
  }
  state_ = update(predict(state_, params_), z, params_);
  return state_.x(0);
}

DynamicRssiKalmanFilter::DynamicRssiKalmanFilter(KalmanParams params, std::size_t window_n,
                                                 double q_scale)
    : params_(std::move(params)), window_(window_n), q_scale_(q_scale), current_q_(params_.Q) {
  validate(params_);
  if (!(std::isfinite(q_scale) && q_scale > 0.0)) {
    throw Error(ErrorCode::InvalidParams, fmt::format("q_scale must be > 0, got {}", q_scale));
  }
}

double DynamicRssiKalmanFilter::step(double z) {
  if (!started_) {
    state_ = initial_state(Eigen::Vector2d(z, 0.0), params_);
    started_ = true;
  }
  KalmanParams step_params = params_;
  if (window_.size() >= 2) {
    step_params.Q = q_scale_ * window_variance(window_) * Eigen::Matrix2d::Identity();
  }
  current_q_ = step_params.Q;
  state_ = update(predict(state_, step_params), z, step_params);
  window_.push(z);
  return state_.x(0);
}

Trace smooth_trace(const Trace& trace, const KalmanParams& params, FilterInit init) {
  if (trace.empty()) throw Error(ErrorCode::EmptyTrace, "cannot filter an empty trace");
  validate(params);
  auto metadata = params_metadata(trace.metadata(), params);
  metadata["filter.mode"] = "static";
  return run_per_beacon(
      trace, [&] { return RssiKalmanFilter(params, init.x0); }, std::move(metadata));
}

Trace smooth_trace_dynamic(const Trace& trace, const KalmanParams& params, std::size_t window_n,
                           double q_scale) {
  if (trace.empty()) throw Error(ErrorCode::EmptyTrace, "cannot filter an empty trace");
  validate(params);
  if (window_n < 2) {
    throw Error(ErrorCode::InvalidParams, fmt::format("window_n must be >= 2, got {}", window_n));
  }
  if (!(std::isfinite(q_scale) && q_scale > 0.0)) {
    throw Error(ErrorCode::InvalidParams, fmt::format("q_scale must be > 0, got {}", q_scale));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& s : trace.samples()) ++counts[s.beacon_id];
  for (const auto& [id, n] : counts) {
    if (n < 2) {
      throw Error(ErrorCode::InsufficientSamples,
                  fmt::format("beacon '{}' has {} sample(s); dynamic filtering needs at least 2", id, n));
    }
  }
  auto metadata = params_metadata(trace.metadata(), params);
  metadata["filter.mode"] = "dynamic";
  metadata["filter.window_n"] = fmt::format("{}", window_n);
  metadata["filter.q_scale"] = fmt::format("{}", q_scale);
  return run_per_beacon(
      trace, [&] { return DynamicRssiKalmanFilter(params, window_n, q_scale); }, std::move(metadata));
}

}  // namespace bleloc::filter

#pragma once

// Independent reference implementations used as test oracles. They avoid the
// library (and Eigen) on purpose: plain arrays, textbook formulas, brute force.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <list>
#include <random>
#include <vector>

namespace oracle {

// Two-state constant-velocity Kalman filter written out element by element.
struct TextbookKalman {
  double dt, q, r;
  double x[2];
  double P[2][2];

  TextbookKalman(double dt_, double p0, double q_, double r_, double z0)
      : dt(dt_), q(q_), r(r_), x{z0, 0.0}, P{{p0, 0.0}, {0.0, p0}} {}

  double step(double z) {
    // Prediction: x = F x, P = F P F' + Q with F = [[1, dt], [0, 1]].
    const double xp0 = x[0] + dt * x[1];
    const double xp1 = x[1];
    const double a = P[0][0], b = P[0][1], c = P[1][0], d = P[1][1];
    const double pp00 = a + dt * (b + c) + dt * dt * d + q;
    const double pp01 = b + dt * d;
    const double pp10 = c + dt * d;
    const double pp11 = d + q;
    // Correction with H = [1, 0].
    const double s = pp00 + r;
    const double k0 = pp00 / s;
    const double k1 = pp10 / s;
    const double innov = z - xp0;
    x[0] = xp0 + k0 * innov;
    x[1] = xp1 + k1 * innov;
    P[0][0] = (1.0 - k0) * pp00;
    P[0][1] = (1.0 - k0) * pp01;
    P[1][0] = pp10 - k1 * pp00;
    P[1][1] = pp11 - k1 * pp01;
    return x[0];
  }
};

inline std::vector<double> textbook_filter(const std::vector<double>& zs, double dt, double p0, double q,
                                           double r) {
  std::vector<double> out;
  if (zs.empty()) return out;
  TextbookKalman kf(dt, p0, q, r, zs.front());
  for (const double z : zs) out.push_back(std::clamp(kf.step(z), -120.0, 0.0));
  return out;
}

// Sliding window modelled as a std::list: append, then erase from the front
// while too long.
struct ListWindow {
  std::size_t capacity;
  std::list<double> items;

  void push(double v) {
    items.push_back(v);
    while (items.size() > capacity) items.erase(items.begin());
  }
};

// Two-pass population variance.
template <typename Range>
double two_pass_variance(const Range& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const double v : values) {
    sum += v;
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(n);
}

inline double mean_abs_dev(const std::vector<double>& v, double truth) {
  double s = 0.0;
  for (const double x : v) s += std::fabs(x - truth);
  return s / static_cast<double>(v.size());
}

// Bin k holds values with k*w <= v < (k+1)*w; counted by direct comparison
// against every candidate bin.
inline std::vector<std::size_t> brute_histogram(const std::vector<double>& v, double w, std::int64_t k_lo,
                                                std::int64_t k_hi) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(k_hi - k_lo + 1), 0);
  for (const double x : v) {
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const double lo = static_cast<double>(k) * w;
      const double hi = static_cast<double>(k + 1) * w;
      if (x >= lo && x < hi) {
        ++counts[static_cast<std::size_t>(k - k_lo)];
        break;
      }
    }
  }
  return counts;
}

// Big-endian integer to bytes by repeated division.
inline std::vector<std::uint8_t> to_be_bytes(std::uint64_t value, std::size_t width) {
  std::vector<std::uint8_t> out(width, 0);
  for (std::size_t i = 0; i < width; ++i) {
    out[width - 1 - i] = static_cast<std::uint8_t>(value % 256);
    value /= 256;
  }
  return out;
}

// Two's complement of a negative dBm value as an unsigned byte.
inline std::uint8_t twos_complement(int dbm) { return static_cast<std::uint8_t>(256 + dbm); }

}  // namespace oracle

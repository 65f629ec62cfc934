#include "bleloc/position.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "bleloc/error.hpp"

namespace bleloc::position {

namespace {

using Eigen::Matrix2d;
using Eigen::MatrixX2d;
using Eigen::Vector2d;
using Eigen::VectorXd;

Vector2d to_eigen(Point2 p) { return {p.x, p.y}; }
Point2 to_point(const Vector2d& v) { return {v.x(), v.y()}; }

double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

struct GaussNewtonResult {
  Point2 position;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimises |r(p)|^2. `eval` fills residuals and, when the Jacobian pointer is
// non-null, the m x 2 Jacobian. Steps are halved until the cost does not grow.
template <typename Eval>
GaussNewtonResult gauss_newton(Point2 start, Eval&& eval, const SolverOptions& options) {
  GaussNewtonResult result;
  Vector2d p = to_eigen(start);
  VectorXd r;
  MatrixX2d jac;
  eval(p, r, &jac);
  double cost = r.squaredNorm();

  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    const Vector2d grad = jac.transpose() * r;
    if (grad.squaredNorm() == 0.0) {
      result.converged = true;
      break;
    }
    const Matrix2d jtj = jac.transpose() * jac;
    Vector2d delta = -jtj.ldlt().solve(grad);
    if (!delta.allFinite()) delta = -jtj.completeOrthogonalDecomposition().solve(grad);
    if (!delta.allFinite()) break;

    double alpha = 1.0;
    bool accepted = false;
    VectorXd trial_r;
    for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
      eval(p + alpha * delta, trial_r, nullptr);
      if (trial_r.squaredNorm() <= cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the Gauss-Newton direction: p is stationary.
      result.converged = true;
      break;
    }
    p += alpha * delta;
    eval(p, r, &jac);
    cost = r.squaredNorm();
    if (alpha * delta.norm() < options.step_tolerance_m) {
      result.converged = true;
      break;
    }
  }
  result.position = to_point(p);
  result.cost = cost;
  return result;
}

// Unit vector from a to p, zero when they coincide.
Vector2d unit_from(const Vector2d& p, const Vector2d& a) {
  const Vector2d d = p - a;
  const double n = d.norm();
  return n > 1e-12 ? Vector2d(d / n) : Vector2d::Zero();
}

void check_finite(std::span<const Anchor> anchors) {
  for (const auto& a : anchors) {
    if (!is_finite(a.position)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("anchor '{}' has non-finite position", a.beacon_id));
    }
  }
}

Point2 centroid(std::span<const Anchor> anchors) {
  Point2 c;
  for (const auto& a : anchors) c = c + a.position;
  return (1.0 / static_cast<double>(anchors.size())) * c;
}

// Boundary intersection points of two circles (0, 1 or 2 points).
std::vector<Point2> circle_intersections(const Circle& a, const Circle& b) {
  const Point2 delta = b.center - a.center;
  const double d = norm(delta);
  if (d == 0.0 || d > a.radius + b.radius || d < std::abs(a.radius - b.radius)) return {};
  const double along = (a.radius * a.radius - b.radius * b.radius + d * d) / (2.0 * d);
  const double h = std::sqrt(std::max(0.0, a.radius * a.radius - along * along));
  const Point2 e = (1.0 / d) * delta;
  const Point2 mid = a.center + along * e;
  const Point2 perp{-e.y, e.x};
  return {mid + h * perp, mid - h * perp};
}

}  // namespace

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::Immediate: return "immediate";
    case Zone::Near: return "near";
    case Zone::Far: return "far";
    case Zone::Unknown: return "unknown";
  }
  return "unknown";
}

ProximityZone classify_proximity(double distance_m, const ProximityThresholds& thresholds) {
  if (std::isnan(distance_m) || std::isinf(distance_m)) return {Zone::Unknown, distance_m};
  if (distance_m < 0.0) {
    throw Error(ErrorCode::InvalidDistance, fmt::format("negative distance {}", distance_m));
  }
  if (distance_m < thresholds.immediate_max_m) return {Zone::Immediate, distance_m};
  if (distance_m <= thresholds.near_max_m) return {Zone::Near, distance_m};
  return {Zone::Far, distance_m};
}

PositionEstimate proximity_region(std::span<const RangedAnchor> anchors) {
  if (anchors.empty()) throw Error(ErrorCode::NoAnchors, "proximity needs at least one anchor");
  PositionEstimate est;
  est.method = Method::Proximity;
  std::vector<Anchor> plain;
  for (const auto& ra : anchors) {
    if (!(std::isfinite(ra.radius_m) && ra.radius_m > 0.0)) {
      throw Error(ErrorCode::InvalidDistance,
                  fmt::format("radius for '{}' must be > 0, got {}", ra.anchor.beacon_id, ra.radius_m));
    }
    est.candidate_region.push_back({ra.anchor.position, ra.radius_m});
    plain.push_back(ra.anchor);
  }
  check_finite(plain);

  const auto& circles = est.candidate_region;
  auto inside_all = [&](Point2 p) {
    return std::all_of(circles.begin(), circles.end(), [&](const Circle& c) { return c.contains(p); });
  };

  const Point2 anchor_centroid = centroid(plain);
  if (inside_all(anchor_centroid)) {
    est.position = anchor_centroid;
    return est;
  }
  // The intersection of disks is convex. If non-empty, its leftmost point is
  // either a disk's leftmost point or a pairwise boundary intersection, so
  // those candidates decide emptiness and their feasible mean is inside it.
  std::vector<Point2> candidates;
  for (std::size_t i = 0; i < circles.size(); ++i) {
    candidates.push_back(circles[i].center - Point2{circles[i].radius, 0.0});
    for (std::size_t j = i + 1; j < circles.size(); ++j) {
      const auto pts = circle_intersections(circles[i], circles[j]);
      candidates.insert(candidates.end(), pts.begin(), pts.end());
    }
  }
  Point2 sum;
  std::size_t feasible = 0;
  for (const auto& c : candidates) {
    if (inside_all(c)) {
      sum = sum + c;
      ++feasible;
    }
  }
  if (feasible > 0) est.position = (1.0 / static_cast<double>(feasible)) * sum;
  return est;
}

void check_geometry(std::span<const Anchor> anchors, double threshold_m2) {
  if (anchors.size() < 3) {
    throw Error(ErrorCode::ArityError, fmt::format("at least three anchors required, got {}", anchors.size()));
  }
  check_finite(anchors);
  double measure = 0.0;
  if (anchors.size() == 3) {
    measure = 0.5 * std::abs(cross(anchors[1].position - anchors[0].position,
                                   anchors[2].position - anchors[0].position));
  } else {
    const Point2 c = centroid(anchors);
    Matrix2d scatter = Matrix2d::Zero();
    for (const auto& a : anchors) {
      const Vector2d d = to_eigen(a.position - c);
      scatter += d * d.transpose();
    }
    measure = Eigen::SelfAdjointEigenSolver<Matrix2d>(scatter).eigenvalues().minCoeff();
  }
  if (!(measure >= threshold_m2)) {
    throw Error(ErrorCode::DegenerateGeometry,
                fmt::format("anchors are collinear (spread {:.3g} m^2 below {:.3g})", measure, threshold_m2));
  }
}

PositionEstimate trilaterate(std::span<const Anchor> anchors, std::span<const double> distances_m,
                             const SolverOptions& options) {
  if (anchors.size() != distances_m.size()) {
    throw Error(ErrorCode::ArityError, fmt::format("{} anchors but {} distances", anchors.size(),
                                                   distances_m.size()));
  }
  check_geometry(anchors, options.degeneracy_threshold_m2);
  for (const double d : distances_m) {
    if (!(std::isfinite(d) && d >= 0.0)) {
      throw Error(ErrorCode::InvalidDistance, fmt::format("range must be finite and >= 0, got {}", d));
    }
  }
  const std::size_t n = anchors.size();

  // Subtracting the first circle equation leaves a linear system in p.
  const Vector2d a0 = to_eigen(anchors[0].position);
  MatrixX2d lin(n - 1, 2);
  VectorXd rhs(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const Vector2d ai = to_eigen(anchors[i].position);
    lin.row(static_cast<Eigen::Index>(i - 1)) = 2.0 * (ai - a0).transpose();
    rhs(static_cast<Eigen::Index>(i - 1)) =
        distances_m[0] * distances_m[0] - distances_m[i] * distances_m[i] + ai.squaredNorm() - a0.squaredNorm();
  }
  const Vector2d start = lin.colPivHouseholderQr().solve(rhs);

  auto eval = [&](const Vector2d& p, VectorXd& r, MatrixX2d* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector2d ai = to_eigen(anchors[i].position);
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = (p - ai).norm() - distances_m[i];
      if (jac) jac->row(row) = unit_from(p, ai).transpose();
    }
  };
  const auto gn = gauss_newton(to_point(start), eval, options);
  if (!gn.converged) {
    throw Error(ErrorCode::NoConvergence,
                fmt::format("trilateration did not converge after {} iterations", gn.iterations));
  }
  PositionEstimate est;
  est.method = Method::Lateration;
  est.position = gn.position;
  est.residual = std::sqrt(gn.cost / static_cast<double>(n));
  return est;
}

PositionEstimate triangulate(std::span<const Anchor> anchors, std::span<const double> bearings_rad) {
  if (anchors.size() != 2 || bearings_rad.size() != 2) {
    throw Error(ErrorCode::ArityError, "angulation takes exactly two anchors and two bearings");
  }
  check_finite(anchors);
  if (!std::isfinite(bearings_rad[0]) || !std::isfinite(bearings_rad[1])) {
    throw Error(ErrorCode::InvalidArgument, "bearing is not finite");
  }
  const Point2 a0 = anchors[0].position;
  const Point2 a1 = anchors[1].position;
  if (distance(a0, a1) < 1e-12) throw Error(ErrorCode::DegenerateGeometry, "anchors coincide");

  const Point2 u0{std::cos(bearings_rad[0]), std::sin(bearings_rad[0])};
  const Point2 u1{std::cos(bearings_rad[1]), std::sin(bearings_rad[1])};
  // a0 + t0 u0 = a1 + t1 u1
  const double det = cross(u0, u1);
  if (std::abs(det) < 1e-12) throw Error(ErrorCode::NoIntersection, "bearing lines are parallel");
  const Point2 base = a1 - a0;
  const double t0 = cross(base, u1) / det;
  const double t1 = cross(base, u0) / det;
  if (t0 < 0.0 || t1 < 0.0) {
    throw Error(ErrorCode::NoIntersection, "bearing rays diverge (intersection behind an anchor)");
  }
  PositionEstimate est;
  est.method = Method::Angulation;
  est.position = a0 + t0 * u0;
  est.residual = 0.0;
  return est;
}

PositionEstimate tdoa_locate(std::span<const Anchor> receivers, std::span<const double> range_diffs_m,
                             const SolverOptions& options) {
  if (receivers.size() < 3) {
    throw Error(ErrorCode::ArityError,
                fmt::format("at least three receivers required, got {}", receivers.size()));
  }
  if (range_diffs_m.size() + 1 != receivers.size()) {
    throw Error(ErrorCode::ArityError, fmt::format("{} receivers need {} range differences, got {}",
                                                   receivers.size(), receivers.size() - 1,
                                                   range_diffs_m.size()));
  }
  check_geometry(receivers, options.degeneracy_threshold_m2);
  for (const double d : range_diffs_m) {
    if (!std::isfinite(d)) throw Error(ErrorCode::InvalidArgument, "range difference is not finite");
  }

  const std::size_t m = range_diffs_m.size();
  const Vector2d r0 = to_eigen(receivers[0].position);

  // With q = p - r0, R0 = |q| and s_i = r_i - r0:
  //   2 s_i . q + 2 dd_i R0 = |s_i|^2 - dd_i^2
  MatrixX2d a(m, 2);
  VectorXd b(m);
  VectorXd c(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vector2d s = to_eigen(receivers[i + 1].position) - r0;
    const auto row = static_cast<Eigen::Index>(i);
    a.row(row) = 2.0 * s.transpose();
    b(row) = s.squaredNorm() - range_diffs_m[i] * range_diffs_m[i];
    c(row) = 2.0 * range_diffs_m[i];
  }

  std::vector<Vector2d> starts;
  if (m >= 3) {
    Eigen::MatrixXd full(m, 3);
    full << a, c;
    const auto qr = full.colPivHouseholderQr();
    if (qr.rank() == 3) starts.push_back(qr.solve(b).head<2>() + r0);
  }
  // q(R0) = u - v R0 substituted into |q| = R0.
  const auto qr2 = a.colPivHouseholderQr();
  const Vector2d u = qr2.solve(b);
  const Vector2d v = qr2.solve(c);
  const double qa = v.squaredNorm() - 1.0;
  const double qb = -2.0 * u.dot(v);
  const double qc = u.squaredNorm();
  std::vector<double> roots;
  if (std::abs(qa) < 1e-12) {
    if (std::abs(qb) > 1e-15) roots.push_back(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      roots.push_back((-qb + sq) / (2.0 * qa));
      roots.push_back((-qb - sq) / (2.0 * qa));
    } else {
      roots.push_back(-qb / (2.0 * qa));
    }
  }
  for (const double root : roots) {
    if (root >= 0.0 && std::isfinite(root)) starts.push_back(u - v * root + r0);
  }
  const Point2 center = centroid(receivers);
  starts.push_back(to_eigen(center));

  auto eval = [&](const Vector2d& p, VectorXd& r, MatrixX2d* jac) {
    r.resize(static_cast<Eigen::Index>(m));
    if (jac) jac->resize(static_cast<Eigen::Index>(m), 2);
    const double d0 = (p - r0).norm();
    const Vector2d g0 = unit_from(p, r0);
    for (std::size_t i = 0; i < m; ++i) {
      const Vector2d ri = to_eigen(receivers[i + 1].position);
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = (p - ri).norm() - d0 - range_diffs_m[i];
      if (jac) jac->row(row) = (unit_from(p, ri) - g0).transpose();
    }
  };

  // Refine every start; keep the lowest cost, then the one nearest the
  // receivers' centroid (mirror solutions of a 3-receiver fix).
  std::optional<GaussNewtonResult> best;
  int last_iterations = 0;
  for (const auto& s : starts) {
    if (!s.allFinite()) continue;
    const auto gn = gauss_newton(to_point(s), eval, options);
    last_iterations = gn.iterations;
    if (!gn.converged) continue;
    if (!best) {
      best = gn;
      continue;
    }
    const double scale = std::max(1e-24, 1e-9 * std::max(gn.cost, best->cost));
    if (gn.cost < best->cost - scale) {
      best = gn;
    } else if (std::abs(gn.cost - best->cost) <= scale &&
               distance(gn.position, center) < distance(best->position, center)) {
      best = gn;
    }
  }
  if (!best) {
    throw Error(ErrorCode::NoConvergence,
                fmt::format("TDoA solve did not converge after {} iterations", last_iterations));
  }
  PositionEstimate est;
  est.method = Method::Tdoa;
  est.position = best->position;
  est.residual = std::sqrt(best->cost / static_cast<double>(m));
  return est;
}

std::string_view to_string(Metric metric) {
  return metric == Metric::Manhattan ? "manhattan" : "euclidean";
}

Metric metric_from_string(std::string_view name) {
  if (name == "euclidean") return Metric::Euclidean;
  if (name == "manhattan") return Metric::Manhattan;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown metric '{}'", name));
}

FingerprintDb fingerprint_build(std::span<const Survey> surveys, Metric metric) {
  if (surveys.empty()) throw Error(ErrorCode::NoSurveys, "no survey points");
  FingerprintDb db;
  db.metric = metric;
  for (const auto& survey : surveys) {
    if (survey.trace.empty()) {
      throw Error(ErrorCode::EmptyTrace, fmt::format("survey at ({}, {}) has no samples", survey.position.x,
                                                     survey.position.y));
    }
    if (!is_finite(survey.position)) throw Error(ErrorCode::InvalidArgument, "survey position not finite");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& s : survey.trace.samples()) {
      auto& [sum, count] = acc[s.beacon_id];
      sum += s.rssi_dbm;
      ++count;
    }
    Fingerprint fp;
    fp.position = survey.position;
    for (const auto& [id, sc] : acc) fp.signature[id] = sc.first / static_cast<double>(sc.second);
    db.entries.push_back(std::move(fp));
  }
  return db;
}

double signature_distance(const std::map<std::string, double>& a,
                          const std::map<std::string, double>& b, Metric metric) {
  double acc = 0.0;
  auto add = [&](double x, double y) {
    const double d = x - y;
    acc += metric == Metric::Euclidean ? d * d : std::abs(d);
  };
  for (const auto& [id, va] : a) {
    const auto it = b.find(id);
    add(va, it == b.end() ? kMissingBeaconDbm : it->second);
  }
  for (const auto& [id, vb] : b) {
    if (!a.contains(id)) add(kMissingBeaconDbm, vb);
  }
  return metric == Metric::Euclidean ? std::sqrt(acc) : acc;
}

PositionEstimate fingerprint_locate(const FingerprintDb& db, const std::map<std::string, double>& observation,
                                    std::size_t k) {
  if (db.entries.empty()) throw Error(ErrorCode::InvalidArgument, "fingerprint database is empty");
  if (observation.empty()) throw Error(ErrorCode::InvalidArgument, "observation is empty");
  if (k < 1 || k > db.entries.size()) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("k must be in [1, {}], got {}", db.entries.size(), k));
  }
  struct Candidate {
    double distance;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    const auto& sig = db.entries[i].signature;
    const bool shares = std::any_of(observation.begin(), observation.end(),
                                    [&](const auto& kv) { return sig.contains(kv.first); });
    if (shares) candidates.push_back({signature_distance(observation, sig, db.metric), i});
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::NoComparableEntries, "no database entry shares a beacon with the observation");
  }
  if (k > candidates.size()) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("k = {} exceeds the {} comparable entries", k, candidates.size()));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.distance < y.distance; });

  Point2 sum;
  double dist_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sum = sum + db.entries[candidates[i].index].position;
    dist_sum += candidates[i].distance;
  }
  PositionEstimate est;
  est.method = Method::Fingerprint;
  est.position = (1.0 / static_cast<double>(k)) * sum;
  est.residual = dist_sum / static_cast<double>(k);
  return est;
}

FingerprintDb parse_fingerprint_db(std::string_view json_text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(json_text);
    FingerprintDb db;
    db.metric = metric_from_string(doc.value("metric", std::string("euclidean")));
    for (const auto& e : doc.at("entries")) {
      Fingerprint fp;
      fp.position = {e.at("x").get<double>(), e.at("y").get<double>()};
      if (!is_finite(fp.position)) throw Error(ErrorCode::InvalidArgument, "entry position not finite");
      for (const auto& [id, v] : e.at("signature").items()) fp.signature[id] = v.get<double>();
      if (fp.signature.empty()) throw Error(ErrorCode::InvalidArgument, "entry with empty signature");
      db.entries.push_back(std::move(fp));
    }
    return db;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::string format_fingerprint_db(const FingerprintDb& db) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["metric"] = std::string(to_string(db.metric));
  doc["entries"] = ordered_json::array();
  for (const auto& e : db.entries) {
    ordered_json entry;
    entry["x"] = e.position.x;
    entry["y"] = e.position.y;
    entry["signature"] = ordered_json::object();
    for (const auto& [id, v] : e.signature) entry["signature"][id] = v;
    doc["entries"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

std::vector<Anchor> parse_anchors(std::string_view json_text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(json_text);
    const json& list = doc.is_object() ? doc.at("anchors") : doc;
    std::vector<Anchor> anchors;
    for (const auto& a : list) {
      Anchor anchor;
      anchor.beacon_id = a.at("beacon_id").get<std::string>();
      anchor.position = {a.at("x").get<double>(), a.at("y").get<double>()};
      anchor.tx_power_dbm = a.value("tx_power_dbm", -59.0);
      if (!is_finite(anchor.position)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("anchor '{}' position not finite", anchor.beacon_id));
      }
      anchors.push_back(std::move(anchor));
    }
    return anchors;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::string format_anchors(std::span<const Anchor> anchors) {
  using nlohmann::ordered_json;
  auto list = ordered_json::array();
  for (const auto& a : anchors) {
    ordered_json o;
    o["beacon_id"] = a.beacon_id;
    o["x"] = a.position.x;
    o["y"] = a.position.y;
    o["tx_power_dbm"] = a.tx_power_dbm;
    list.push_back(std::move(o));
  }
  return list.dump(2) + "\n";
}

}  // namespace bleloc::position

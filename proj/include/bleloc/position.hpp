#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bleloc/model.hpp"

namespace bleloc::position {

// ---------------------------------------------------------------------------
// Proximity

enum class Zone { Immediate, Near, Far, Unknown };

std::string_view to_string(Zone zone);

/// Immediate: d < immediate_max_m. Near: immediate_max_m <= d <= near_max_m.
/// Far: d > near_max_m.
struct ProximityThresholds {
  double immediate_max_m = 0.5;
  double near_max_m = 4.0;
};

struct ProximityZone {
  Zone zone = Zone::Unknown;
  double distance_m = 0.0;
};

/// Non-finite distances map to Unknown. Throws InvalidDistance for d < 0.
ProximityZone classify_proximity(double distance_m, const ProximityThresholds& thresholds = {});

struct RangedAnchor {
  Anchor anchor;
  double radius_m = 0.0;
};

/// The candidate region is the set of circles. When their common
/// intersection is non-empty the position is the anchor centroid if it lies in
/// every circle, otherwise the centroid of the intersection's boundary
/// vertices. Throws NoAnchors / InvalidDistance.
PositionEstimate proximity_region(std::span<const RangedAnchor> anchors);

// ---------------------------------------------------------------------------
// Lateration, angulation, hyperbolic lateration

struct SolverOptions {
  int max_iterations = 100;
  double step_tolerance_m = 1e-10;
  // Triangle area (3 anchors) or smallest scatter eigenvalue (more anchors).
  double degeneracy_threshold_m2 = 1e-9;
};

/// Throws DegenerateGeometry when the anchor set is (numerically) collinear.
void check_geometry(std::span<const Anchor> anchors, double threshold_m2 = 1e-9);

/// Least-squares fit of sum (|p - a_i| - d_i)^2. Gauss-Newton started at the
/// linearised closed-form solution. residual = RMS range error.
PositionEstimate trilaterate(std::span<const Anchor> anchors, std::span<const double> distances_m,
                             const SolverOptions& options = {});

/// Intersection of two bearing rays. Bearings are world-frame angles,
/// counterclockwise from +x.
PositionEstimate triangulate(std::span<const Anchor> anchors, std::span<const double> bearings_rad);

/// range_diffs_m[i - 1] = |p - r_i| - |p - r_0| for receivers i >= 1.
/// residual = RMS range-difference mismatch.
PositionEstimate tdoa_locate(std::span<const Anchor> receivers, std::span<const double> range_diffs_m,
                             const SolverOptions& options = {});

// ---------------------------------------------------------------------------
// Fingerprinting

enum class Metric { Euclidean, Manhattan };

std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view name);

/// Imputed level for a beacon heard on only one side of a comparison.
inline constexpr double kMissingBeaconDbm = -100.0;

struct Fingerprint {
  Point2 position;
  std::map<std::string, double> signature;
};

struct FingerprintDb {
  std::vector<Fingerprint> entries;
  Metric metric = Metric::Euclidean;
};

struct Survey {
  Point2 position;
  Trace trace;
};

/// Signature = mean raw RSSI per beacon. Throws NoSurveys / EmptyTrace.
FingerprintDb fingerprint_build(std::span<const Survey> surveys, Metric metric = Metric::Euclidean);

/// Distance between two signatures over the union of their beacons.
double signature_distance(const std::map<std::string, double>& a,
                          const std::map<std::string, double>& b, Metric metric);

/// k-nearest neighbours among entries sharing at least one beacon with the
/// observation; ties broken by database order. Throws NoComparableEntries,
/// InvalidArgument (k out of range, empty observation or db).
PositionEstimate fingerprint_locate(const FingerprintDb& db,
                                    const std::map<std::string, double>& observation, std::size_t k);

// ---------------------------------------------------------------------------
// JSON persistence

FingerprintDb parse_fingerprint_db(std::string_view json_text);
std::string format_fingerprint_db(const FingerprintDb& db);

/// `[ { "beacon_id": ..., "x": ..., "y": ..., "tx_power_dbm": ... } ]`
std::vector<Anchor> parse_anchors(std::string_view json_text);
std::string format_anchors(std::span<const Anchor> anchors);

}  // namespace bleloc::position

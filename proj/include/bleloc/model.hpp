#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bleloc {

inline constexpr double kRssiFloorDbm = -120.0;
inline constexpr double kRssiCeilDbm = 0.0;

/// BLE advertising channels.
inline constexpr int kAdvChannels[3] = {37, 38, 39};

bool is_adv_channel(int channel);

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
double norm(Point2 p);
double distance(Point2 a, Point2 b);
bool is_finite(Point2 p);

/// One received advertisement: timestamp is milliseconds since trace start.
struct RssiSample {
  std::int64_t timestamp_ms = 0;
  std::string beacon_id;
  double rssi_dbm = 0.0;
  std::optional<double> tx_power_dbm;
  int channel = 37;

  friend bool operator==(const RssiSample&, const RssiSample&) = default;
};

/// Throws InvalidSample / InvalidChannel when the sample breaks its invariants.
void validate(const RssiSample& sample);

using Metadata = std::map<std::string, std::string>;

/// Ordered sequence of samples plus free-form string metadata.
///
/// Construction validates every sample, checks that timestamps do not go
/// backwards for any single beacon (in the given order), and then stable-sorts
/// by timestamp. A constructed Trace is never mutated.
class Trace {
 public:
  Trace() = default;
  explicit Trace(std::vector<RssiSample> samples, Metadata metadata = {});

  const std::vector<RssiSample>& samples() const noexcept { return samples_; }
  const Metadata& metadata() const noexcept { return metadata_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  /// Distinct beacon ids in order of first appearance.
  std::vector<std::string> beacon_ids() const;

  /// Copy with one metadata entry added or replaced.
  Trace with_metadata(const std::string& key, const std::string& value) const;

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::vector<RssiSample> samples_;
  Metadata metadata_;
};

struct Anchor {
  std::string beacon_id;
  Point2 position;
  double tx_power_dbm = -59.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

enum class Method { Proximity, Lateration, Angulation, Fingerprint, Tdoa };

std::string_view to_string(Method method);

struct Circle {
  Point2 center;
  double radius = 0.0;

  bool contains(Point2 p, double tolerance = 1e-9) const;
};

struct PositionEstimate {
  std::optional<Point2> position;
  Method method = Method::Lateration;
  double residual = 0.0;
  // Only filled for Method::Proximity.
  std::vector<Circle> candidate_region;
};

enum class TraceFormat { Csv, Json };

/// `.json` selects JSON; everything else is CSV.
TraceFormat format_from_path(const std::filesystem::path& path);

Trace load_trace(const std::filesystem::path& path, TraceFormat format);
void save_trace(const Trace& trace, const std::filesystem::path& path, TraceFormat format);

// In-memory forms of the two file formats.
Trace parse_trace_csv(std::string_view text);
std::string format_trace_csv(const Trace& trace);
Trace parse_trace_json(std::string_view text);
std::string format_trace_json(const Trace& trace);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace bleloc

#include "bleloc/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "bleloc/error.hpp"

namespace bleloc {

namespace {

constexpr std::string_view kCsvHeader = "timestamp_ms,beacon_id,rssi_dbm,tx_power_dbm,channel";

[[noreturn]] void parse_fail(std::size_t line, const std::string& what,
                             ErrorCode code = ErrorCode::ParseError) {
  throw Error(code, fmt::format("line {}: {}", line, what));
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  // from_chars rejects a leading '+', which is fine for our own output.
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

// Per-beacon timestamp monotonicity over the given (unsorted) order.
// Returns the index of the first offending sample, or npos.
std::size_t first_backwards_sample(const std::vector<RssiSample>& samples) {
  std::unordered_map<std::string, std::int64_t> last;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto [it, inserted] = last.try_emplace(s.beacon_id, s.timestamp_ms);
    if (!inserted) {
      if (s.timestamp_ms < it->second) return i;
      it->second = s.timestamp_ms;
    }
  }
  return std::string::npos;
}

void check_text_field(const std::string& s, std::string_view what) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorCode::InvalidSample, fmt::format("{} '{}' contains a separator", what, s));
  }
}

}  // namespace

bool is_adv_channel(int channel) {
  return std::find(std::begin(kAdvChannels), std::end(kAdvChannels), channel) !=
         std::end(kAdvChannels);
}

double norm(Point2 p) { return std::hypot(p.x, p.y); }
double distance(Point2 a, Point2 b) { return norm(a - b); }
bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

bool Circle::contains(Point2 p, double tolerance) const {
  return distance(p, center) <= radius + tolerance;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Proximity: return "proximity";
    case Method::Lateration: return "lateration";
    case Method::Angulation: return "angulation";
    case Method::Fingerprint: return "fingerprint";
    case Method::Tdoa: return "tdoa";
  }
  return "unknown";
}

void validate(const RssiSample& sample) {
  if (sample.timestamp_ms < 0) {
    throw Error(ErrorCode::InvalidSample, fmt::format("negative timestamp {}", sample.timestamp_ms));
  }
  if (!std::isfinite(sample.rssi_dbm) || sample.rssi_dbm < kRssiFloorDbm ||
      sample.rssi_dbm > kRssiCeilDbm) {
    throw Error(ErrorCode::InvalidSample,
                fmt::format("rssi {} outside [{}, {}] dBm", sample.rssi_dbm, kRssiFloorDbm,
                            kRssiCeilDbm));
  }
  if (sample.tx_power_dbm && !std::isfinite(*sample.tx_power_dbm)) {
    throw Error(ErrorCode::InvalidSample, "tx_power_dbm is not finite");
  }
  if (!is_adv_channel(sample.channel)) {
    throw Error(ErrorCode::InvalidChannel, fmt::format("invalid channel {}", sample.channel));
  }
}

Trace::Trace(std::vector<RssiSample> samples, Metadata metadata)
    : samples_(std::move(samples)), metadata_(std::move(metadata)) {
  for (const auto& s : samples_) validate(s);
  if (const auto bad = first_backwards_sample(samples_); bad != std::string::npos) {
    throw Error(ErrorCode::NonMonotonicTimestamp,
                fmt::format("sample {} of beacon '{}' goes back in time", bad,
                            samples_[bad].beacon_id));
  }
  std::stable_sort(samples_.begin(), samples_.end(),
                   [](const RssiSample& a, const RssiSample& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });
}

std::vector<std::string> Trace::beacon_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : samples_) {
    if (std::find(ids.begin(), ids.end(), s.beacon_id) == ids.end()) ids.push_back(s.beacon_id);
  }
  return ids;
}

Trace Trace::with_metadata(const std::string& key, const std::string& value) const {
  Trace copy = *this;
  copy.metadata_[key] = value;
  return copy;
}

TraceFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? TraceFormat::Json : TraceFormat::Csv;
}

// CSV: optional `#key=value` metadata lines, then the mandatory header, then rows.
Trace parse_trace_csv(std::string_view text) {
  Metadata metadata;
  std::vector<RssiSample> samples;
  std::unordered_map<std::string, std::int64_t> last_ts;
  bool header_seen = false;
  std::size_t line_no = 0;

  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!header_seen) {
      if (!line.empty() && line.front() == '#') {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) parse_fail(line_no, "metadata line without '='");
        metadata[std::string(line.substr(1, eq - 1))] = std::string(line.substr(eq + 1));
        continue;
      }
      if (line != kCsvHeader) parse_fail(line_no, fmt::format("expected header '{}'", kCsvHeader));
      header_seen = true;
      continue;
    }
    if (line.empty()) {
      if (pos >= text.size()) break;
      parse_fail(line_no, "empty row");
    }

    const auto fields = split(line, ',');
    if (fields.size() != 5) parse_fail(line_no, fmt::format("expected 5 fields, got {}", fields.size()));
    RssiSample s;
    if (!parse_number(fields[0], s.timestamp_ms)) parse_fail(line_no, "bad timestamp_ms");
    s.beacon_id = std::string(fields[1]);
    if (s.beacon_id.empty()) parse_fail(line_no, "empty beacon_id");
    if (!parse_number(fields[2], s.rssi_dbm)) parse_fail(line_no, "bad rssi_dbm");
    if (!fields[3].empty()) {
      double tx = 0.0;
      if (!parse_number(fields[3], tx)) parse_fail(line_no, "bad tx_power_dbm");
      s.tx_power_dbm = tx;
    }
    if (!parse_number(fields[4], s.channel)) parse_fail(line_no, "bad channel");
    try {
      validate(s);
    } catch (const Error& e) {
      parse_fail(line_no, e.what(), e.code());
    }
    auto [it, inserted] = last_ts.try_emplace(s.beacon_id, s.timestamp_ms);
    if (!inserted) {
      if (s.timestamp_ms < it->second) {
        parse_fail(line_no, fmt::format("timestamp goes back in time for beacon '{}'", s.beacon_id),
                   ErrorCode::NonMonotonicTimestamp);
      }
      it->second = s.timestamp_ms;
    }
    samples.push_back(std::move(s));
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, "missing CSV header");
  return Trace(std::move(samples), std::move(metadata));
}

std::string format_trace_csv(const Trace& trace) {
  std::string out;
  for (const auto& [key, value] : trace.metadata()) {
    if (key.find_first_of("=\n\r") != std::string::npos || value.find_first_of("\n\r") != std::string::npos) {
      throw Error(ErrorCode::InvalidSample, fmt::format("metadata entry '{}' not representable in CSV", key));
    }
    out += fmt::format("#{}={}\n", key, value);
  }
  out += kCsvHeader;
  out += '\n';
  for (const auto& s : trace.samples()) {
    check_text_field(s.beacon_id, "beacon_id");
    out += fmt::format("{},{},{:.4f},", s.timestamp_ms, s.beacon_id, s.rssi_dbm);
    if (s.tx_power_dbm) out += fmt::format("{:.4f}", *s.tx_power_dbm);
    out += fmt::format(",{}\n", s.channel);
  }
  return out;
}

Trace parse_trace_json(std::string_view text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(text);
    Metadata metadata;
    if (doc.contains("metadata")) {
      for (const auto& [key, value] : doc.at("metadata").items()) {
        metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    std::vector<RssiSample> samples;
    const auto& rows = doc.at("samples");
    samples.reserve(rows.size());
    for (const auto& row : rows) {
      RssiSample s;
      s.timestamp_ms = row.at("timestamp_ms").get<std::int64_t>();
      s.beacon_id = row.at("beacon_id").get<std::string>();
      s.rssi_dbm = row.at("rssi_dbm").get<double>();
      if (row.contains("tx_power_dbm") && !row.at("tx_power_dbm").is_null()) {
        s.tx_power_dbm = row.at("tx_power_dbm").get<double>();
      }
      s.channel = row.at("channel").get<int>();
      samples.push_back(std::move(s));
    }
    return Trace(std::move(samples), std::move(metadata));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::string format_trace_json(const Trace& trace) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["metadata"] = ordered_json::object();
  for (const auto& [key, value] : trace.metadata()) doc["metadata"][key] = value;
  auto rows = ordered_json::array();
  for (const auto& s : trace.samples()) {
    ordered_json row;
    row["timestamp_ms"] = s.timestamp_ms;
    row["beacon_id"] = s.beacon_id;
    row["rssi_dbm"] = s.rssi_dbm;
    row["tx_power_dbm"] = s.tx_power_dbm ? ordered_json(*s.tx_power_dbm) : ordered_json(nullptr);
    row["channel"] = s.channel;
    rows.push_back(std::move(row));
  }
  doc["samples"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoError, fmt::format("write failed for '{}'", path.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, fmt::format("cannot replace '{}'", path.string()));
  }
}

Trace load_trace(const std::filesystem::path& path, TraceFormat format) {
  const auto text = read_file(path);
  return format == TraceFormat::Json ? parse_trace_json(text) : parse_trace_csv(text);
}

void save_trace(const Trace& trace, const std::filesystem::path& path, TraceFormat format) {
  write_file_atomic(path, format == TraceFormat::Json ? format_trace_json(trace)
                                                      : format_trace_csv(trace));
}

}  // namespace bleloc

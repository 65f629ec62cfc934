#include "bleloc/config.hpp"

#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "bleloc/error.hpp"

namespace bleloc {

namespace {

using nlohmann::json;

const std::set<std::string> kSections = {"filter", "path_loss", "sim", "position", "eval"};
const std::set<std::string> kKeys = {
    "dt",           "p0",
    "q",            "r",
    "window_n",     "q_scale",
    "ref_power_dbm", "exponent",
    "seed",         "shadow_sigma_db",
    "advertising_interval_ms", "interval_jitter_ms",
    "packet_loss_prob", "duration_ms",
    "channels",     "k",
    "immediate_max_m", "near_max_m",
    "bin_width_m"};

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail(fmt::format("override '{}' is not key=value", assignment));
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(fmt::format("override key '{}' has an empty path segment", key));
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object()) *node = json::object();
    start = dot + 1;
  }
}

// Sections and top level share one flat key space.
json flatten(const json& doc) {
  if (!doc.is_object()) fail("config must be a JSON object");
  json flat = json::object();
  auto put = [&](const std::string& key, const json& v) {
    if (!kKeys.contains(key)) fail(fmt::format("unknown config key '{}'", key));
    flat[key] = v;
  };
  for (const auto& [key, v] : doc.items()) {
    if (kSections.contains(key)) {
      if (!v.is_object()) fail(fmt::format("config section '{}' must be an object", key));
      for (const auto& [inner, iv] : v.items()) put(inner, iv);
    } else {
      put(key, v);
    }
  }
  return flat;
}

template <typename T>
T get_or(const json& flat, const char* key, T fallback) {
  if (!flat.contains(key)) return fallback;
  try {
    return flat.at(key).get<T>();
  } catch (const json::exception&) {
    fail(fmt::format("config key '{}' has the wrong type", key));
  }
}

}  // namespace

CliConfig parse_cli_config(std::string_view json_text, std::span<const std::string> overrides,
                           std::optional<std::uint64_t> seed) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) fail("config is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  const json flat = flatten(doc);

  CliConfig c;
  const auto def = filter::default_params();
  try {
    c.filter = filter::make_params(get_or(flat, "dt", def.dt), get_or(flat, "p0", def.P0(0, 0)),
                                   get_or(flat, "q", def.Q(0, 0)), get_or(flat, "r", def.R));
  } catch (const Error& e) {
    fail(e.what());
  }
  const auto window_n = get_or<std::int64_t>(flat, "window_n", static_cast<std::int64_t>(c.window_n));
  if (window_n < 2) fail(fmt::format("window_n must be >= 2, got {}", window_n));
  c.window_n = static_cast<std::size_t>(window_n);
  c.q_scale = get_or(flat, "q_scale", c.q_scale);
  if (!(c.q_scale > 0.0)) fail(fmt::format("q_scale must be > 0, got {}", c.q_scale));

  c.sim.path_loss.ref_power_dbm = get_or(flat, "ref_power_dbm", c.sim.path_loss.ref_power_dbm);
  c.sim.path_loss.exponent = get_or(flat, "exponent", c.sim.path_loss.exponent);
  c.sim.seed = get_or<std::uint64_t>(flat, "seed", c.sim.seed);
  if (seed) c.sim.seed = *seed;
  c.sim.shadow_sigma_db = get_or(flat, "shadow_sigma_db", c.sim.shadow_sigma_db);
  c.sim.advertising_interval_ms = get_or(flat, "advertising_interval_ms", c.sim.advertising_interval_ms);
  c.sim.interval_jitter_ms = get_or(flat, "interval_jitter_ms", c.sim.interval_jitter_ms);
  c.sim.packet_loss_prob = get_or(flat, "packet_loss_prob", c.sim.packet_loss_prob);
  c.sim.duration_ms = get_or(flat, "duration_ms", c.sim.duration_ms);
  c.sim.channels = get_or(flat, "channels", c.sim.channels);
  sim::validate(c.sim);

  const auto k = get_or<std::int64_t>(flat, "k", static_cast<std::int64_t>(c.k));
  if (k < 1) fail(fmt::format("k must be >= 1, got {}", k));
  c.k = static_cast<std::size_t>(k);
  c.proximity.immediate_max_m = get_or(flat, "immediate_max_m", c.proximity.immediate_max_m);
  c.proximity.near_max_m = get_or(flat, "near_max_m", c.proximity.near_max_m);
  if (!(c.proximity.immediate_max_m > 0.0 && c.proximity.near_max_m >= c.proximity.immediate_max_m)) {
    fail("proximity thresholds must satisfy 0 < immediate_max_m <= near_max_m");
  }
  c.bin_width_m = get_or(flat, "bin_width_m", c.bin_width_m);
  if (!(c.bin_width_m > 0.0)) fail(fmt::format("bin_width_m must be > 0, got {}", c.bin_width_m));
  return c;
}

CliConfig load_cli_config(const std::optional<std::filesystem::path>& path,
                          std::span<const std::string> overrides, std::optional<std::uint64_t> seed) {
  const std::string text = path ? read_file(*path) : std::string("{}");
  return parse_cli_config(text, overrides, seed);
}

std::string default_config_json() {
  const CliConfig c;
  nlohmann::ordered_json doc;
  doc["dt"] = c.filter.dt;
  doc["p0"] = c.filter.P0(0, 0);
  doc["q"] = c.filter.Q(0, 0);
  doc["r"] = c.filter.R;
  doc["window_n"] = c.window_n;
  doc["q_scale"] = c.q_scale;
  doc["ref_power_dbm"] = c.sim.path_loss.ref_power_dbm;
  doc["exponent"] = c.sim.path_loss.exponent;
  doc["seed"] = c.sim.seed;
  doc["shadow_sigma_db"] = c.sim.shadow_sigma_db;
  doc["advertising_interval_ms"] = c.sim.advertising_interval_ms;
  doc["interval_jitter_ms"] = c.sim.interval_jitter_ms;
  doc["packet_loss_prob"] = c.sim.packet_loss_prob;
  doc["duration_ms"] = c.sim.duration_ms;
  doc["channels"] = c.sim.channels;
  doc["k"] = c.k;
  doc["immediate_max_m"] = c.proximity.immediate_max_m;
  doc["near_max_m"] = c.proximity.near_max_m;
  doc["bin_width_m"] = c.bin_width_m;
  return doc.dump(2) + "\n";
}

}  // namespace bleloc

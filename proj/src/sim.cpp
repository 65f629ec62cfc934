#include "bleloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "bleloc/error.hpp"

namespace bleloc::sim {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + stream);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::jitter(std::int64_t half_width) {
  if (half_width <= 0) return 0;
  const auto span = static_cast<double>(2 * half_width + 1);
  const auto k = static_cast<std::int64_t>(std::floor(uniform() * span));
  return std::min(k, 2 * half_width) - half_width;
}

void validate(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  try {
    ranging::validate(c.path_loss);
  } catch (const Error& e) {
    fail(e.what());
  }
  if (!(std::isfinite(c.shadow_sigma_db) && c.shadow_sigma_db >= 0.0)) {
    fail(fmt::format("shadow_sigma_db must be >= 0, got {}", c.shadow_sigma_db));
  }
  if (c.advertising_interval_ms <= 0) {
    fail(fmt::format("advertising_interval_ms must be > 0, got {}", c.advertising_interval_ms));
  }
  if (c.interval_jitter_ms < 0 || c.interval_jitter_ms >= c.advertising_interval_ms) {
    fail(fmt::format("interval_jitter_ms must be in [0, advertising_interval_ms), got {}",
                     c.interval_jitter_ms));
  }
  if (!(c.packet_loss_prob >= 0.0 && c.packet_loss_prob < 1.0)) {
    fail(fmt::format("packet_loss_prob must be in [0, 1), got {}", c.packet_loss_prob));
  }
  if (c.duration_ms <= 0) fail(fmt::format("duration_ms must be > 0, got {}", c.duration_ms));
  if (c.channels.empty()) fail("channel cycle is empty");
  for (const int ch : c.channels) {
    if (!is_adv_channel(ch)) fail(fmt::format("invalid channel {}", ch));
  }
}

void validate(const Scenario& s) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidScenario, what); };
  if (s.beacons.empty()) fail("scenario has no beacons");
  std::set<std::string> ids;
  for (const auto& b : s.beacons) {
    if (b.beacon_id.empty()) fail("beacon with empty id");
    if (!ids.insert(b.beacon_id).second) fail(fmt::format("duplicate beacon id '{}'", b.beacon_id));
    if (!is_finite(b.position) || !std::isfinite(b.tx_power_dbm)) {
      fail(fmt::format("beacon '{}' has non-finite fields", b.beacon_id));
    }
  }
  if (s.device_positions.empty()) fail("device schedule is empty");
  if (s.device_positions.front().start_ms != 0) fail("device schedule must start at 0 ms");
  for (std::size_t i = 0; i < s.device_positions.size(); ++i) {
    if (!is_finite(s.device_positions[i].position)) fail("device position not finite");
    if (i > 0 && s.device_positions[i].start_ms <= s.device_positions[i - 1].start_ms) {
      fail("device schedule times must be strictly increasing");
    }
  }
}

namespace {

Point2 position_at(const std::vector<ScheduleEntry>& schedule, std::int64_t t) {
  const auto it = std::upper_bound(schedule.begin(), schedule.end(), t,
                                   [](std::int64_t v, const ScheduleEntry& e) { return v < e.start_ms; });
  return std::prev(it)->position;
}

}  // namespace

Trace simulate(const Scenario& scenario, const SimConfig& config) {
  validate(scenario);
  validate(config);

  std::vector<RssiSample> samples;
  for (std::size_t b = 0; b < scenario.beacons.size(); ++b) {
    const auto& beacon = scenario.beacons[b];
    Rng rng(derive_seed(config.seed, b));
    std::int64_t t = std::abs(rng.jitter(config.interval_jitter_ms));
    std::size_t event = 0;
    while (t < config.duration_ms) {
      const double keep = rng.uniform();
      const double shadow = rng.normal();
      const int channel = config.channels[event % config.channels.size()];
      if (keep >= config.packet_loss_prob) {
        const double d = std::max(kMinDistanceM, distance(beacon.position, position_at(scenario.device_positions, t)));
        const double rssi = ranging::distance_to_rssi(config.path_loss, d) + config.shadow_sigma_db * shadow;
        RssiSample s;
        s.timestamp_ms = t;
        s.beacon_id = beacon.beacon_id;
        s.rssi_dbm = std::clamp(rssi, kRssiFloorDbm, kRssiCeilDbm);
        s.tx_power_dbm = beacon.tx_power_dbm;
        s.channel = channel;
        samples.push_back(std::move(s));
      }
      ++event;
      t += config.advertising_interval_ms + rng.jitter(config.interval_jitter_ms);
    }
  }

  Metadata md;
  md["sim.seed"] = fmt::format("{}", config.seed);
  md["sim.rng"] = std::string(kRngDescription);
  md["sim.ref_power_dbm"] = fmt::format("{}", config.path_loss.ref_power_dbm);
  md["sim.exponent"] = fmt::format("{}", config.path_loss.exponent);
  md["sim.shadow_sigma_db"] = fmt::format("{}", config.shadow_sigma_db);
  md["sim.advertising_interval_ms"] = fmt::format("{}", config.advertising_interval_ms);
  md["sim.interval_jitter_ms"] = fmt::format("{}", config.interval_jitter_ms);
  md["sim.packet_loss_prob"] = fmt::format("{}", config.packet_loss_prob);
  md["sim.duration_ms"] = fmt::format("{}", config.duration_ms);
  md["truth.scenario"] = nlohmann::json::parse(format_scenario(scenario)).dump();
  return Trace(std::move(samples), std::move(md));
}

std::vector<SpotTrace> paper_experiment(const SimConfig& config) {
  SimConfig spot_config = config;
  spot_config.duration_ms = kExperimentDurationMs;
  validate(spot_config);

  std::vector<SpotTrace> spots;
  spots.reserve(kExperimentSpots);
  for (std::size_t k = 0; k < kExperimentSpots; ++k) {
    const double d = kExperimentSpacingM * static_cast<double>(k + 1);
    Scenario scenario;
    scenario.beacons.push_back({"beacon-0", {0.0, 0.0}, config.path_loss.ref_power_dbm});
    scenario.device_positions.push_back({0, {d, 0.0}});
    spot_config.seed = derive_seed(config.seed, k);
    Trace trace = simulate(scenario, spot_config)
                      .with_metadata("sim.master_seed", fmt::format("{}", config.seed))
                      .with_metadata("experiment.spot_index", fmt::format("{}", k))
                      .with_metadata("truth.distance_m", fmt::format("{}", d));
    spots.push_back({d, std::move(trace)});
  }
  return spots;
}

Scenario parse_scenario(std::string_view json_text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(json_text);
    Scenario s;
    for (const auto& b : doc.at("beacons")) {
      Anchor a;
      a.beacon_id = b.at("beacon_id").get<std::string>();
      a.position = {b.at("x").get<double>(), b.at("y").get<double>()};
      a.tx_power_dbm = b.value("tx_power_dbm", -59.0);
      s.beacons.push_back(std::move(a));
    }
    for (const auto& e : doc.at("device_positions")) {
      s.device_positions.push_back(
          {e.at("start_ms").get<std::int64_t>(), {e.at("x").get<double>(), e.at("y").get<double>()}});
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::string format_scenario(const Scenario& scenario) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["beacons"] = ordered_json::array();
  for (const auto& b : scenario.beacons) {
    doc["beacons"].push_back(
        {{"beacon_id", b.beacon_id}, {"x", b.position.x}, {"y", b.position.y}, {"tx_power_dbm", b.tx_power_dbm}});
  }
  doc["device_positions"] = ordered_json::array();
  for (const auto& e : scenario.device_positions) {
    doc["device_positions"].push_back({{"start_ms", e.start_ms}, {"x", e.position.x}, {"y", e.position.y}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace bleloc::sim

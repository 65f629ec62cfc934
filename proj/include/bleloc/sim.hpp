#pragma once

// Deterministic RSSI trace generator.
//
// Random numbers: every stream is a std::mt19937_64 seeded with
// derive_seed(master, stream_index) (splitmix64 finaliser over the sum).
// A uniform double in [0, 1) is (next() >> 11) * 2^-53; a standard normal is
// Box-Muller, sqrt(-2 ln(1 - u1)) * cos(2 pi u2), one normal per two uniforms;
// an integer jitter in [-j, j] is floor(u * (2j + 1)) - j. These rules are
// recorded in every trace's metadata ("sim.rng") so the traces can be
// regenerated elsewhere.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bleloc/model.hpp"
#include "bleloc/ranging.hpp"

namespace bleloc::sim {

inline constexpr std::string_view kRngDescription =
    "mt19937_64;seed=splitmix64(master+stream);u=(x>>11)*2^-53;normal=box-muller-cos;"
    "jitter=floor(u*(2j+1))-j";

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// The generator described above.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();
  double normal();
  /// Uniform integer in [-half_width, half_width].
  std::int64_t jitter(std::int64_t half_width);

 private:
  std::mt19937_64 engine_;
};

struct SimConfig {
  std::uint64_t seed = 1;
  ranging::PathLossModel path_loss{};
  double shadow_sigma_db = 4.0;
  std::int64_t advertising_interval_ms = 100;
  std::int64_t interval_jitter_ms = 10;
  double packet_loss_prob = 0.0;
  std::int64_t duration_ms = 120'000;
  std::vector<int> channels = {37, 38, 39};
};

/// Throws InvalidConfig.
void validate(const SimConfig& config);

struct ScheduleEntry {
  std::int64_t start_ms = 0;
  Point2 position;
};

struct Scenario {
  std::vector<Anchor> beacons;
  // Piecewise-constant device position; first entry starts at 0.
  std::vector<ScheduleEntry> device_positions;
};

/// Throws InvalidScenario.
void validate(const Scenario& scenario);

/// Distances below this are clamped before evaluating the path-loss model.
inline constexpr double kMinDistanceM = 0.01;

/// Per beacon: events at advertising_interval +/- jitter (first event at a
/// jitter in [0, j]), each kept with probability 1 - packet_loss_prob, rssi =
/// model(d) + N(0, sigma^2) clamped to [-120, 0], channel cycling through
/// config.channels per event. Beacon k uses stream derive_seed(seed, k).
Trace simulate(const Scenario& scenario, const SimConfig& config);

inline constexpr std::size_t kExperimentSpots = 10;
inline constexpr double kExperimentSpacingM = 0.5;
inline constexpr std::int64_t kExperimentDurationMs = 120'000;

struct SpotTrace {
  double true_distance_m = 0.0;
  Trace trace;
};

/// One beacon at the origin, receiver at 0.5, 1.0, ..., 5.0 m on the x axis,
/// 120 s each. Spot k is simulated with seed derive_seed(config.seed, k).
std::vector<SpotTrace> paper_experiment(const SimConfig& config);

/// `{ "beacons": [anchor...], "device_positions": [ {"start_ms", "x", "y"} ] }`
Scenario parse_scenario(std::string_view json_text);
std::string format_scenario(const Scenario& scenario);

}  // namespace bleloc::sim

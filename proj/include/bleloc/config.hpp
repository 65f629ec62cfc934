#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "bleloc/filter.hpp"
#include "bleloc/position.hpp"
#include "bleloc/ranging.hpp"
#include "bleloc/sim.hpp"

namespace bleloc {

/// Everything a pipeline can be tuned with, from one JSON document.
///
/// Keys may sit at the top level or inside the sections "filter",
/// "path_loss", "sim" and "position":
///
///   filter:    dt p0 q r window_n q_scale
///   path_loss: ref_power_dbm exponent
///   sim:       seed shadow_sigma_db advertising_interval_ms interval_jitter_ms
///              packet_loss_prob duration_ms channels
///   position:  k immediate_max_m near_max_m
///   eval:      bin_width_m
///
/// Unknown keys are rejected.
struct CliConfig {
  filter::KalmanParams filter = filter::default_params();
  std::size_t window_n = filter::kDefaultWindowN;
  double q_scale = filter::kDefaultQScale;
  sim::SimConfig sim{};
  position::ProximityThresholds proximity{};
  std::size_t k = 1;
  double bin_width_m = 0.25;

  const ranging::PathLossModel& path_loss() const { return sim.path_loss; }
};

/// `overrides` are `dotted.key=value` strings; the value is parsed as JSON
/// when possible, otherwise taken as a string. Throws InvalidConfig.
CliConfig parse_cli_config(std::string_view json_text, std::span<const std::string> overrides = {},
                           std::optional<std::uint64_t> seed = std::nullopt);

/// Reads `path` when given, otherwise starts from defaults.
CliConfig load_cli_config(const std::optional<std::filesystem::path>& path,
                          std::span<const std::string> overrides = {},
                          std::optional<std::uint64_t> seed = std::nullopt);

/// Flat JSON with every default value.
std::string default_config_json();

}  // namespace bleloc

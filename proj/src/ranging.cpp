#include "bleloc/ranging.hpp"

#include <cmath>

#include <fmt/format.h>

#include "bleloc/error.hpp"

namespace bleloc::ranging {

void validate(const PathLossModel& model) {
  if (!(model.exponent > 0.5 && model.exponent <= 8.0)) {
    throw Error(ErrorCode::InvalidModel,
                fmt::format("path-loss exponent {} outside (0.5, 8]", model.exponent));
  }
  if (!(model.ref_power_dbm >= -100.0 && model.ref_power_dbm <= 0.0)) {
    throw Error(ErrorCode::InvalidModel,
                fmt::format("reference power {} dBm outside [-100, 0]", model.ref_power_dbm));
  }
}

double rssi_to_distance(const PathLossModel& model, double rssi_dbm) {
  validate(model);
  if (!std::isfinite(rssi_dbm)) throw Error(ErrorCode::InvalidArgument, "rssi is not finite");
  return std::pow(10.0, (model.ref_power_dbm - rssi_dbm) / (10.0 * model.exponent));
}

double distance_to_rssi(const PathLossModel& model, double distance_m) {
  validate(model);
  if (!(std::isfinite(distance_m) && distance_m > 0.0)) {
    throw Error(ErrorCode::InvalidDistance, fmt::format("distance must be > 0, got {}", distance_m));
  }
  return model.ref_power_dbm - 10.0 * model.exponent * std::log10(distance_m);
}

double toa_to_distance(double t_seconds) {
  if (!(std::isfinite(t_seconds) && t_seconds >= 0.0)) {
    throw Error(ErrorCode::InvalidTime, fmt::format("time of arrival must be >= 0, got {}", t_seconds));
  }
  return kSpeedOfLight * t_seconds;
}

double tdoa_range_difference(double dt_seconds) {
  if (!std::isfinite(dt_seconds)) throw Error(ErrorCode::InvalidTime, "time difference is not finite");
  return kSpeedOfLight * dt_seconds;
}

}  // namespace bleloc::ranging

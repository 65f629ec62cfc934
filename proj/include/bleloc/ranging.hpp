#pragma once

namespace bleloc::ranging {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

/// Log-distance path loss: rssi(d) = ref_power_dbm - 10 n log10(d / 1 m).
struct PathLossModel {
  double ref_power_dbm = -59.0;
  double exponent = 2.0;
};

/// Throws InvalidModel unless exponent in (0.5, 8] and ref power in [-100, 0].
void validate(const PathLossModel& model);

/// Strictly positive for every finite rssi. Throws InvalidArgument for
/// non-finite rssi.
double rssi_to_distance(const PathLossModel& model, double rssi_dbm);

/// Throws InvalidDistance for d <= 0 or non-finite d.
double distance_to_rssi(const PathLossModel& model, double distance_m);

/// Throws InvalidTime for negative or non-finite t.
double toa_to_distance(double t_seconds);

/// Positive when the signal reached the second receiver later.
double tdoa_range_difference(double dt_seconds);

}  // namespace bleloc::ranging

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bleloc/filter.hpp"
#include "bleloc/sim.hpp"

namespace bleloc::eval {

/// Mean absolute deviation from the truth. Throws EmptyInput.
double accuracy(std::span<const double> estimates, double truth);

/// Population standard deviation about the estimates' own mean.
/// Throws InsufficientSamples below two values.
double precision(std::span<const double> estimates);

/// Root-mean-square deviation from the truth. Throws EmptyInput.
double rms_error(std::span<const double> estimates, double truth);

/// 2-D accuracy: mean Euclidean deviation from the truth. Throws EmptyInput.
double position_accuracy(std::span<const Point2> estimates, Point2 truth);

/// Bins are [edges[i], edges[i + 1]), left-closed and right-open.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

/// Bins [k w, (k + 1) w) from the one holding the minimum to the one holding
/// the maximum. Throws EmptyInput, InvalidArgument (w <= 0 or non-finite data).
Histogram error_histogram(std::span<const double> errors, double bin_width_m);

inline constexpr double kDefaultBinWidthM = 0.25;

struct SpotRow {
  double true_distance_m = 0.0;
  std::string pipeline;
  double mean_est_m = 0.0;
  double accuracy_m = 0.0;
  double precision_m = 0.0;
  double rms_error_m = 0.0;
  std::size_t n_samples = 0;
};

struct PipelineSummary {
  std::string pipeline;
  // Largest per-spot RMS distance error: the headline "max error" figure.
  double max_spot_rms_error_m = 0.0;
  double max_spot_accuracy_m = 0.0;
  double max_sample_abs_error_m = 0.0;
};

struct PipelineHistogram {
  std::string pipeline;
  Histogram histogram;
};

struct ErrorReport {
  std::vector<SpotRow> per_spot;
  std::vector<PipelineHistogram> histograms;
  std::vector<PipelineSummary> summary;
  std::uint64_t master_seed = 0;
  double bin_width_m = kDefaultBinWidthM;

  const PipelineSummary& summary_for(const std::string& pipeline) const;
  std::vector<SpotRow> rows_for(const std::string& pipeline) const;
};

inline constexpr const char* kRawPipeline = "raw";
inline constexpr const char* kFilteredPipeline = "filtered";
inline constexpr const char* kDynamicPipeline = "dynamic";

/// Runs the ten-spot experiment and ranges every sample three ways: raw rssi,
/// static Kalman filtered, and dynamic-Q filtered, all through
/// config.path_loss.
ErrorReport reproduce_paper_experiment(const sim::SimConfig& config, const filter::KalmanParams& params,
                                       std::size_t window_n, double q_scale = filter::kDefaultQScale,
                                       double bin_width_m = kDefaultBinWidthM);

struct WindowSweepRow {
  std::size_t window_n = 0;
  double mean_accuracy_m = 0.0;
  double max_spot_rms_error_m = 0.0;
};

/// Mean per-spot accuracy of the dynamic filter for each window size.
std::vector<WindowSweepRow> sweep_window_sizes(const sim::SimConfig& config, const filter::KalmanParams& params,
                                               std::span<const std::size_t> window_sizes,
                                               double q_scale = filter::kDefaultQScale);

/// Values rounded to 12 significant digits.
std::string format_report_json(const ErrorReport& report);
/// `true_m,pipeline,mean_m,accuracy_m,precision_m,n`
std::string format_spot_summary_csv(const ErrorReport& report);
/// `pipeline,bin_lo,bin_hi,count`
std::string format_error_hist_csv(const ErrorReport& report);
/// `window_n,mean_accuracy_m,max_spot_rms_error_m`
std::string format_window_sweep_csv(std::span<const WindowSweepRow> rows);

/// Round to 12 significant digits.
double round_sig12(double v);

}  // namespace bleloc::eval

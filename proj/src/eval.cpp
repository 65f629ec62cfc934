#include "bleloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <json.hpp>

#include "bleloc/error.hpp"
#include "bleloc/ranging.hpp"

namespace bleloc::eval {

namespace {

constexpr std::size_t kMaxBins = 10'000'000;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string num(double v) { return fmt::format("{:.12g}", v); }

struct PipelineRun {
  std::string name;
  std::vector<SpotRow> rows;
  std::vector<double> abs_errors;
};

void add_spot(PipelineRun& run, double truth, const std::vector<double>& estimates) {
  SpotRow row;
  row.true_distance_m = truth;
  row.pipeline = run.name;
  row.mean_est_m = mean_of(estimates);
  row.accuracy_m = accuracy(estimates, truth);
  row.precision_m = estimates.size() >= 2 ? precision(estimates) : 0.0;
  row.rms_error_m = rms_error(estimates, truth);
  row.n_samples = estimates.size();
  run.rows.push_back(row);
  for (const double e : estimates) run.abs_errors.push_back(std::abs(e - truth));
}

std::vector<double> ranges_of(const Trace& trace, const ranging::PathLossModel& model) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& s : trace.samples()) out.push_back(ranging::rssi_to_distance(model, s.rssi_dbm));
  return out;
}

}  // namespace

double accuracy(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw Error(ErrorCode::EmptyInput, "accuracy of no estimates");
  double s = 0.0;
  for (const double e : estimates) s += std::abs(e - truth);
  return s / static_cast<double>(estimates.size());
}

double precision(std::span<const double> estimates) {
  if (estimates.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples,
                fmt::format("precision needs at least 2 estimates, got {}", estimates.size()));
  }
  const double m = mean_of(estimates);
  double ss = 0.0;
  for (const double e : estimates) ss += (e - m) * (e - m);
  return std::sqrt(ss / static_cast<double>(estimates.size()));
}

double rms_error(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw Error(ErrorCode::EmptyInput, "rms error of no estimates");
  double ss = 0.0;
  for (const double e : estimates) ss += (e - truth) * (e - truth);
  return std::sqrt(ss / static_cast<double>(estimates.size()));
}

double position_accuracy(std::span<const Point2> estimates, Point2 truth) {
  if (estimates.empty()) throw Error(ErrorCode::EmptyInput, "accuracy of no estimates");
  double s = 0.0;
  for (const auto& p : estimates) s += distance(p, truth);
  return s / static_cast<double>(estimates.size());
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (const auto c : counts) t += c;
  return t;
}

Histogram error_histogram(std::span<const double> errors, double bin_width_m) {
  if (errors.empty()) throw Error(ErrorCode::EmptyInput, "histogram of no errors");
  if (!(std::isfinite(bin_width_m) && bin_width_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("bin width must be > 0, got {}", bin_width_m));
  }
  const auto [lo_it, hi_it] = std::minmax_element(errors.begin(), errors.end());
  if (!std::isfinite(*lo_it) || !std::isfinite(*hi_it)) {
    throw Error(ErrorCode::InvalidArgument, "histogram input is not finite");
  }
  const double w = bin_width_m;
  auto edge = [w](double k) { return k * w; };
  double k_lo = std::floor(*lo_it / w);
  if (*lo_it < edge(k_lo)) k_lo -= 1.0;
  if (*lo_it >= edge(k_lo + 1.0)) k_lo += 1.0;
  double k_hi = std::floor(*hi_it / w);
  if (*hi_it < edge(k_hi)) k_hi -= 1.0;
  if (*hi_it >= edge(k_hi + 1.0)) k_hi += 1.0;
  const double span = k_hi - k_lo + 1.0;
  if (!(span >= 1.0 && span <= static_cast<double>(kMaxBins))) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("histogram would need {} bins", span));
  }
  const auto nbins = static_cast<std::size_t>(span);

  Histogram h;
  h.edges.resize(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i) h.edges[i] = edge(k_lo + static_cast<double>(i));
  h.counts.assign(nbins, 0);
  for (const double e : errors) {
    auto i = static_cast<std::ptrdiff_t>(std::floor(e / w) - k_lo);
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(nbins) - 1);
    while (i > 0 && e < h.edges[static_cast<std::size_t>(i)]) --i;
    while (i + 1 < static_cast<std::ptrdiff_t>(nbins) && e >= h.edges[static_cast<std::size_t>(i) + 1]) ++i;
    ++h.counts[static_cast<std::size_t>(i)];
  }
  return h;
}

const PipelineSummary& ErrorReport::summary_for(const std::string& pipeline) const {
  for (const auto& s : summary) {
    if (s.pipeline == pipeline) return s;
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("no pipeline '{}' in report", pipeline));
}

std::vector<SpotRow> ErrorReport::rows_for(const std::string& pipeline) const {
  std::vector<SpotRow> out;
  std::copy_if(per_spot.begin(), per_spot.end(), std::back_inserter(out),
               [&](const SpotRow& r) { return r.pipeline == pipeline; });
  return out;
}

ErrorReport reproduce_paper_experiment(const sim::SimConfig& config, const filter::KalmanParams& params,
                                       std::size_t window_n, double q_scale, double bin_width_m) {
  filter::validate(params);
  const auto spots = sim::paper_experiment(config);

  PipelineRun raw{kRawPipeline, {}, {}};
  PipelineRun filtered{kFilteredPipeline, {}, {}};
  PipelineRun dynamic{kDynamicPipeline, {}, {}};
  for (const auto& spot : spots) {
    add_spot(raw, spot.true_distance_m, ranges_of(spot.trace, config.path_loss));
    add_spot(filtered, spot.true_distance_m,
             ranges_of(filter::smooth_trace(spot.trace, params), config.path_loss));
    add_spot(dynamic, spot.true_distance_m,
             ranges_of(filter::smooth_trace_dynamic(spot.trace, params, window_n, q_scale), config.path_loss));
  }

  ErrorReport report;
  report.master_seed = config.seed;
  report.bin_width_m = bin_width_m;
  for (auto* run : {&raw, &filtered, &dynamic}) {
    PipelineSummary s;
    s.pipeline = run->name;
    for (const auto& row : run->rows) {
      s.max_spot_rms_error_m = std::max(s.max_spot_rms_error_m, row.rms_error_m);
      s.max_spot_accuracy_m = std::max(s.max_spot_accuracy_m, row.accuracy_m);
    }
    s.max_sample_abs_error_m = *std::max_element(run->abs_errors.begin(), run->abs_errors.end());
    report.summary.push_back(s);
    report.histograms.push_back({run->name, error_histogram(run->abs_errors, bin_width_m)});
  }
  for (auto* run : {&raw, &filtered, &dynamic}) {
    report.per_spot.insert(report.per_spot.end(), run->rows.begin(), run->rows.end());
  }
  std::stable_sort(report.per_spot.begin(), report.per_spot.end(),
                   [](const SpotRow& a, const SpotRow& b) { return a.true_distance_m < b.true_distance_m; });
  return report;
}

std::vector<WindowSweepRow> sweep_window_sizes(const sim::SimConfig& config, const filter::KalmanParams& params,
                                               std::span<const std::size_t> window_sizes, double q_scale) {
  const auto spots = sim::paper_experiment(config);
  std::vector<WindowSweepRow> out;
  for (const auto n : window_sizes) {
    WindowSweepRow row;
    row.window_n = n;
    double acc_sum = 0.0;
    for (const auto& spot : spots) {
      const auto est = ranges_of(filter::smooth_trace_dynamic(spot.trace, params, n, q_scale), config.path_loss);
      acc_sum += accuracy(est, spot.true_distance_m);
      row.max_spot_rms_error_m = std::max(row.max_spot_rms_error_m, rms_error(est, spot.true_distance_m));
    }
    row.mean_accuracy_m = acc_sum / static_cast<double>(spots.size());
    out.push_back(row);
  }
  return out;
}

double round_sig12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  return std::strtod(fmt::format("{:.12g}", v).c_str(), nullptr);
}

std::string format_report_json(const ErrorReport& report) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["master_seed"] = report.master_seed;
  doc["bin_width_m"] = round_sig12(report.bin_width_m);
  doc["precision_definition"] = "population standard deviation of estimates about their mean";
  doc["per_spot"] = ordered_json::array();
  for (const auto& r : report.per_spot) {
    doc["per_spot"].push_back({{"true_distance_m", round_sig12(r.true_distance_m)},
                               {"pipeline", r.pipeline},
                               {"mean_est_m", round_sig12(r.mean_est_m)},
                               {"accuracy_m", round_sig12(r.accuracy_m)},
                               {"precision_m", round_sig12(r.precision_m)},
                               {"rms_error_m", round_sig12(r.rms_error_m)},
                               {"n_samples", r.n_samples}});
  }
  doc["histogram"] = ordered_json::object();
  for (const auto& ph : report.histograms) {
    ordered_json h;
    h["edges_m"] = ordered_json::array();
    for (const double e : ph.histogram.edges) h["edges_m"].push_back(round_sig12(e));
    h["counts"] = ph.histogram.counts;
    doc["histogram"][ph.pipeline] = std::move(h);
  }
  doc["summary"] = ordered_json::object();
  for (const auto& s : report.summary) {
    doc["summary"][s.pipeline] = {{"max_spot_rms_error_m", round_sig12(s.max_spot_rms_error_m)},
                                  {"max_spot_accuracy_m", round_sig12(s.max_spot_accuracy_m)},
                                  {"max_sample_abs_error_m", round_sig12(s.max_sample_abs_error_m)}};
  }
  return doc.dump(2) + "\n";
}

std::string format_spot_summary_csv(const ErrorReport& report) {
  std::string out = "true_m,pipeline,mean_m,accuracy_m,precision_m,n\n";
  for (const auto& r : report.per_spot) {
    out += fmt::format("{},{},{},{},{},{}\n", num(r.true_distance_m), r.pipeline, num(r.mean_est_m),
                       num(r.accuracy_m), num(r.precision_m), r.n_samples);
  }
  return out;
}

std::string format_error_hist_csv(const ErrorReport& report) {
  std::string out = "pipeline,bin_lo,bin_hi,count\n";
  for (const auto& ph : report.histograms) {
    const auto& h = ph.histogram;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      out += fmt::format("{},{},{},{}\n", ph.pipeline, num(h.edges[i]), num(h.edges[i + 1]), h.counts[i]);
    }
  }
  return out;
}

std::string format_window_sweep_csv(std::span<const WindowSweepRow> rows) {
  std::string out = "window_n,mean_accuracy_m,max_spot_rms_error_m\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{}\n", r.window_n, num(r.mean_accuracy_m), num(r.max_spot_rms_error_m));
  }
  return out;
}

}  // namespace bleloc::eval

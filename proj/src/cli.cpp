#include "bleloc/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "bleloc/codec.hpp"
#include "bleloc/config.hpp"
#include "bleloc/error.hpp"
#include "bleloc/eval.hpp"
#include "bleloc/filter.hpp"
#include "bleloc/model.hpp"
#include "bleloc/position.hpp"
#include "bleloc/ranging.hpp"
#include "bleloc/sim.hpp"

namespace bleloc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  CliConfig load() const {
    std::optional<fs::path> path;
    if (!config_path.empty()) path = config_path;
    return load_cli_config(path, overrides, seed);
  }
};

ordered_json point_json(const std::optional<Point2>& p) {
  if (!p) return nullptr;
  return {{"x", eval::round_sig12(p->x)}, {"y", eval::round_sig12(p->y)}};
}

ordered_json estimate_json(const PositionEstimate& est) {
  ordered_json out;
  out["method"] = std::string(to_string(est.method));
  out["position"] = point_json(est.position);
  out["residual"] = eval::round_sig12(est.residual);
  if (est.method == Method::Proximity) {
    out["candidate_region"] = ordered_json::array();
    for (const auto& c : est.candidate_region) {
      out["candidate_region"].push_back({{"x", eval::round_sig12(c.center.x)},
                                         {"y", eval::round_sig12(c.center.y)},
                                         {"radius_m", eval::round_sig12(c.radius)}});
    }
  }
  return out;
}

std::map<std::string, double> mean_rssi_by_beacon(const Trace& trace) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& s : trace.samples()) {
    auto& [sum, n] = acc[s.beacon_id];
    sum += s.rssi_dbm;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [id, sn] : acc) out[id] = sn.first / static_cast<double>(sn.second);
  return out;
}

std::string hex_array(std::span<const std::uint8_t> bytes) { return codec::to_hex(bytes); }

ordered_json frame_json(const codec::AdvertisementFrame& frame) {
  ordered_json out;
  out["protocol"] = std::string(codec::variant_name(frame));
  std::visit(
      [&out](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, codec::IBeaconFrame>) {
          out["uuid"] = hex_array(f.uuid);
          out["major"] = f.major;
          out["minor"] = f.minor;
          out["measured_power_dbm"] = f.measured_power_dbm;
        } else if constexpr (std::is_same_v<T, codec::EddystoneUid>) {
          out["tx_power_dbm"] = f.tx_power_dbm;
          out["namespace"] = hex_array(f.namespace_id);
          out["instance"] = hex_array(f.instance_id);
        } else if constexpr (std::is_same_v<T, codec::EddystoneUrl>) {
          out["tx_power_dbm"] = f.tx_power_dbm;
          out["url"] = f.url;
        } else if constexpr (std::is_same_v<T, codec::EddystoneTlm>) {
          out["battery_mv"] = f.battery_mv;
          out["temperature_c"] = eval::round_sig12(f.temperature_c());
          out["adv_count"] = f.adv_count;
          out["uptime_deciseconds"] = f.uptime_deciseconds;
        } else if constexpr (std::is_same_v<T, codec::EddystoneEid>) {
          out["tx_power_dbm"] = f.tx_power_dbm;
          out["ephemeral_id"] = hex_array(f.ephemeral_id);
        } else {
          out["manufacturer_id"] = f.manufacturer_id;
          out["beacon_id"] = hex_array(f.beacon_id);
          out["reference_rssi_dbm"] = f.reference_rssi_dbm;
          out["mfg_reserved"] = f.mfg_reserved;
        }
      },
      frame);
  const auto power = codec::measured_power(frame);
  out["measured_power_dbm"] = power ? ordered_json(*power) : ordered_json(nullptr);
  const auto ref = codec::reference_distance_m(frame);
  out["reference_distance_m"] = ref ? ordered_json(*ref) : ordered_json(nullptr);
  return out;
}

int cmd_simulate(const GlobalOptions& g, const std::string& scenario_path, const std::string& out_path) {
  const auto config = g.load();
  const auto scenario = sim::parse_scenario(read_file(scenario_path));
  const auto trace = sim::simulate(scenario, config.sim);
  save_trace(trace, out_path, format_from_path(out_path));
  return kExitOk;
}

int cmd_filter(const GlobalOptions& g, const std::string& in_path, const std::string& mode,
               const std::string& out_path) {
  const auto config = g.load();
  const auto trace = load_trace(in_path, format_from_path(in_path));
  const auto filtered = mode == "dynamic"
                            ? filter::smooth_trace_dynamic(trace, config.filter, config.window_n, config.q_scale)
                            : filter::smooth_trace(trace, config.filter);
  save_trace(filtered, out_path, format_from_path(out_path));
  return kExitOk;
}

int cmd_locate(const GlobalOptions& g, const std::string& in_path, const std::string& anchors_path,
               const std::string& db_path, const std::string& tdoa_path, const std::string& method,
               const std::string& out_path) {
  const auto config = g.load();
  auto require = [](const std::string& value, const char* flag) {
    if (value.empty()) throw Error(ErrorCode::InvalidArgument, fmt::format("{} is required for this method", flag));
  };
  ordered_json out;

  if (method == "tdoa") {
    require(anchors_path, "--anchors");
    require(tdoa_path, "--tdoa");
    const auto receivers = position::parse_anchors(read_file(anchors_path));
    const auto doc = nlohmann::json::parse(read_file(tdoa_path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::ParseError, "TDoA input is not a JSON object");
    std::vector<double> diffs;
    if (doc.contains("range_diffs_m")) {
      diffs = doc.at("range_diffs_m").get<std::vector<double>>();
    } else if (doc.contains("time_diffs_s")) {
      for (const double t : doc.at("time_diffs_s").get<std::vector<double>>()) {
        diffs.push_back(ranging::tdoa_range_difference(t));
      }
    } else {
      throw Error(ErrorCode::ParseError, "TDoA input needs range_diffs_m or time_diffs_s");
    }
    out = estimate_json(position::tdoa_locate(receivers, diffs));
  } else {
    require(in_path, "--in");
    const auto trace = load_trace(in_path, format_from_path(in_path));
    const auto observed = mean_rssi_by_beacon(trace);
    if (method == "fingerprint") {
      require(db_path, "--db");
      const auto db = position::parse_fingerprint_db(read_file(db_path));
      out = estimate_json(position::fingerprint_locate(db, observed, config.k));
    } else if (method == "proximity" || method == "trilaterate") {
      require(anchors_path, "--anchors");
      const auto anchors = position::parse_anchors(read_file(anchors_path));
      std::vector<Anchor> heard;
      std::vector<double> ranges;
      ordered_json zones = ordered_json::array();
      for (const auto& a : anchors) {
        const auto it = observed.find(a.beacon_id);
        if (it == observed.end()) continue;
        const ranging::PathLossModel model{a.tx_power_dbm, config.path_loss().exponent};
        const double d = ranging::rssi_to_distance(model, it->second);
        heard.push_back(a);
        ranges.push_back(d);
        const auto zone = position::classify_proximity(d, config.proximity);
        zones.push_back({{"beacon_id", a.beacon_id},
                         {"mean_rssi_dbm", eval::round_sig12(it->second)},
                         {"distance_m", eval::round_sig12(d)},
                         {"zone", std::string(position::to_string(zone.zone))}});
      }
      if (method == "trilaterate") {
        out = estimate_json(position::trilaterate(heard, ranges));
      } else {
        std::vector<position::RangedAnchor> ranged;
        for (std::size_t i = 0; i < heard.size(); ++i) ranged.push_back({heard[i], ranges[i]});
        out = estimate_json(position::proximity_region(ranged));
      }
      out["ranges"] = std::move(zones);
    } else {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown method '{}'", method));
    }
  }
  write_file_atomic(out_path, out.dump(2) + "\n");
  return kExitOk;
}

int cmd_reproduce(const GlobalOptions& g, const std::string& out_dir, const std::vector<std::size_t>& sweep) {
  const auto config = g.load();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw Error(ErrorCode::IoError, fmt::format("cannot create output directory '{}'", out_dir));
  }
  const auto report =
      eval::reproduce_paper_experiment(config.sim, config.filter, config.window_n, config.q_scale, config.bin_width_m);
  const fs::path dir(out_dir);
  write_file_atomic(dir / "report.json", eval::format_report_json(report));
  write_file_atomic(dir / "spot_summary.csv", eval::format_spot_summary_csv(report));
  write_file_atomic(dir / "error_hist.csv", eval::format_error_hist_csv(report));
  if (!sweep.empty()) {
    const auto rows = eval::sweep_window_sizes(config.sim, config.filter, sweep, config.q_scale);
    write_file_atomic(dir / "window_sweep.csv", eval::format_window_sweep_csv(rows));
  }
  return kExitOk;
}

int cmd_decode(const std::string& hex, std::ostream& out) {
  const auto bytes = codec::parse_hex(hex);
  const auto frame = codec::decode(bytes);
  out << frame_json(frame).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"BLE beacon micro-location toolkit", "bleloc"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--set", g.overrides, "Override a config value: key=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");

  std::string scenario_path, out_path, in_path, mode = "static", anchors_path, db_path, tdoa_path, method;
  std::string out_dir, hex;
  std::vector<std::size_t> sweep;

  auto* simulate = app.add_subcommand("simulate", "Generate a trace from a scenario");
  simulate->fallthrough();
  simulate->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  simulate->add_option("--out", out_path, "Output trace (.csv or .json)")->required();

  auto* filt = app.add_subcommand("filter", "Kalman-smooth a trace");
  filt->fallthrough();
  filt->add_option("--in", in_path, "Input trace")->required();
  filt->add_option("--mode", mode, "static or dynamic")->check(CLI::IsMember({"static", "dynamic"}));
  filt->add_option("--out", out_path, "Output trace")->required();

  auto* locate = app.add_subcommand("locate", "Estimate a position");
  locate->fallthrough();
  locate->add_option("--in", in_path, "Input trace");
  locate->add_option("--anchors", anchors_path, "Anchor JSON");
  locate->add_option("--db", db_path, "Fingerprint database JSON");
  locate->add_option("--tdoa", tdoa_path, "TDoA measurements JSON");
  locate->add_option("--method", method, "proximity, trilaterate, fingerprint or tdoa")
      ->required()
      ->check(CLI::IsMember({"proximity", "trilaterate", "fingerprint", "tdoa"}));
  locate->add_option("--out", out_path, "Output JSON")->required();

  auto* reproduce = app.add_subcommand("reproduce", "Run the ten-spot ranging experiment");
  reproduce->fallthrough();
  reproduce->add_option("--out-dir", out_dir, "Output directory")->required();
  reproduce->add_option("--sweep-window", sweep, "Window sizes for a dynamic-filter sweep")->delimiter(',');

  auto* decode = app.add_subcommand("decode", "Decode a hex advertisement payload");
  decode->fallthrough();
  decode->add_option("hex", hex, "Payload as hex")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << e.what() << "\n";
    return kExitUser;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (simulate->parsed()) return cmd_simulate(g, scenario_path, out_path);
    if (filt->parsed()) return cmd_filter(g, in_path, mode, out_path);
    if (locate->parsed()) return cmd_locate(g, in_path, anchors_path, db_path, tdoa_path, method, out_path);
    if (reproduce->parsed()) return cmd_reproduce(g, out_dir, sweep);
    if (decode->parsed()) return cmd_decode(hex, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const nlohmann::json::exception& e) {
    err << "error: ParseError: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << "\n";
    return kExitInternal;
  }
  err << "error: UsageError: no command\n";
  return kExitUser;
}

}  // namespace bleloc::cli

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "bleloc/cli.hpp"
#include "bleloc/model.hpp"

namespace bleloc::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bleloc_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }

  // Noise-free, loss-free, jitter-free simulator settings.
  std::string quiet_config() const {
    return write("quiet.json",
                 R"({"sim": {"shadow_sigma_db": 0, "interval_jitter_ms": 0, "duration_ms": 2000}})");
  }

  fs::path dir_;
};

const char* kAnchors = R"([
  {"beacon_id": "a", "x": 0, "y": 0, "tx_power_dbm": -59},
  {"beacon_id": "b", "x": 4, "y": 0, "tx_power_dbm": -59},
  {"beacon_id": "c", "x": 0, "y": 4, "tx_power_dbm": -59}
])";

const char* kScenario = R"({
  "beacons": [
    {"beacon_id": "a", "x": 0, "y": 0, "tx_power_dbm": -59},
    {"beacon_id": "b", "x": 4, "y": 0, "tx_power_dbm": -59},
    {"beacon_id": "c", "x": 0, "y": 4, "tx_power_dbm": -59}
  ],
  "device_positions": [{"start_ms": 0, "x": 1.0, "y": 1.5}]
})";

TEST_F(CliTest, SimulateWritesTraceDeterministically) {
  const auto scenario = write("scenario.json", kScenario);
  const auto r1 = run_cli({"--seed", "5", "simulate", "--scenario", scenario, "--out", path("a.csv")});
  const auto r2 = run_cli({"--seed", "5", "simulate", "--scenario", scenario, "--out", path("b.csv")});
  ASSERT_EQ(r1.code, kExitOk) << r1.err;
  ASSERT_EQ(r2.code, kExitOk) << r2.err;
  EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));
  EXPECT_FALSE(load_trace(path("a.csv"), TraceFormat::Csv).empty());
}

TEST_F(CliTest, SimulateMissingScenarioIsUserError) {
  const auto r = run_cli({"simulate", "--scenario", path("nope.json"), "--out", path("x.csv")});
  EXPECT_EQ(r.code, kExitUser);
  EXPECT_EQ(r.err.rfind("error: IoError:", 0), 0u) << r.err;
  EXPECT_FALSE(fs::exists(path("x.csv")));
}

TEST_F(CliTest, FilterStaticReducesVariance) {
  const auto scenario = write("scenario.json", kScenario);
  ASSERT_EQ(run_cli({"simulate", "--scenario", scenario, "--out", path("raw.json")}).code, kExitOk);
  const auto r = run_cli({"filter", "--in", path("raw.json"), "--mode", "static", "--out", path("f.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto variance_of = [](const Trace& t, const std::string& id) {
    std::vector<double> v;
    for (const auto& s : t.samples()) {
      if (s.beacon_id == id) v.push_back(s.rssi_dbm);
    }
    double m = 0.0;
    for (const double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (const double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size());
  };
  const auto raw = load_trace(path("raw.json"), TraceFormat::Json);
  const auto filtered = load_trace(path("f.json"), TraceFormat::Json);
  for (const char* id : {"a", "b", "c"}) EXPECT_LT(variance_of(filtered, id), variance_of(raw, id));
  EXPECT_EQ(run_cli({"filter", "--in", path("raw.json"), "--mode", "dynamic", "--out", path("d.json")}).code, kExitOk);
}

TEST_F(CliTest, DynamicFilterOnSingleSampleIsUserError) {
  const auto in = write("one.csv", "timestamp_ms,beacon_id,rssi_dbm,tx_power_dbm,channel\n0,a,-60,,37\n");
  const auto r = run_cli({"--set", "window_n=2", "filter", "--in", in, "--mode", "dynamic", "--out", path("o.csv")});
  EXPECT_EQ(r.code, kExitUser);
  EXPECT_NE(r.err.find("InsufficientSamples"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrilaterateNoiseFreeTrace) {
  // JSON keeps full precision; CSV rounds rssi to 1e-4 dB (about 1e-5 m here).
  const auto config = quiet_config();
  const auto scenario = write("scenario.json", kScenario);
  ASSERT_EQ(run_cli({"--config", config, "simulate", "--scenario", scenario, "--out", path("t.json")}).code, kExitOk);
  const auto anchors = write("anchors.json", kAnchors);
  const auto r = run_cli({"--config", config, "locate", "--in", path("t.json"), "--anchors", anchors, "--method",
                          "trilaterate", "--out", path("fix.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(read_file(path("fix.json")));
  EXPECT_EQ(doc.at("method"), "lateration");
  EXPECT_NEAR(doc.at("position").at("x").get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(doc.at("position").at("y").get<double>(), 1.5, 1e-6);
  EXPECT_EQ(doc.at("ranges").size(), 3u);
}

TEST_F(CliTest, ProximityReportsZones) {
  const auto config = quiet_config();
  const auto scenario = write("scenario.json", kScenario);
  ASSERT_EQ(run_cli({"--config", config, "simulate", "--scenario", scenario, "--out", path("t.csv")}).code, kExitOk);
  const auto anchors = write("anchors.json", kAnchors);
  const auto r = run_cli({"locate", "--in", path("t.csv"), "--anchors", anchors, "--method", "proximity", "--out",
                          path("p.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(read_file(path("p.json")));
  EXPECT_EQ(doc.at("method"), "proximity");
  EXPECT_EQ(doc.at("ranges").at(0).at("zone"), "near");
  EXPECT_EQ(doc.at("candidate_region").size(), 3u);
}

TEST_F(CliTest, TwoAnchorsTrilaterateIsArityError) {
  const auto config = quiet_config();
  const auto scenario = write("scenario.json", kScenario);
  ASSERT_EQ(run_cli({"--config", config, "simulate", "--scenario", scenario, "--out", path("t.csv")}).code, kExitOk);
  const auto anchors = write("two.json", R"([{"beacon_id": "a", "x": 0, "y": 0, "tx_power_dbm": -59},
                                             {"beacon_id": "b", "x": 4, "y": 0, "tx_power_dbm": -59}])");
  const auto r = run_cli({"locate", "--in", path("t.csv"), "--anchors", anchors, "--method", "trilaterate", "--out",
                          path("fix.json")});
  EXPECT_EQ(r.code, kExitUser);
  EXPECT_NE(r.err.find("at least three anchors"), std::string::npos) << r.err;
}

TEST_F(CliTest, FingerprintWithEmptyDbIsUserError) {
  const auto in = write("t.csv", "timestamp_ms,beacon_id,rssi_dbm,tx_power_dbm,channel\n0,a,-60,,37\n");
  const auto db = write("db.json", R"({"metric": "euclidean", "entries": []})");
  const auto r = run_cli({"locate", "--in", in, "--db", db, "--method", "fingerprint", "--out", path("o.json")});
  EXPECT_EQ(r.code, kExitUser) << r.err;
}

TEST_F(CliTest, FingerprintNearestEntry) {
  const auto in = write("t.csv", "timestamp_ms,beacon_id,rssi_dbm,tx_power_dbm,channel\n0,a,-61,,37\n100,a,-59,,38\n");
  const auto db = write("db.json", R"({"metric": "euclidean", "entries": [
      {"x": 0, "y": 0, "signature": {"a": -60}},
      {"x": 3, "y": 0, "signature": {"a": -75}}]})");
  const auto r = run_cli({"locate", "--in", in, "--db", db, "--method", "fingerprint", "--out", path("o.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(read_file(path("o.json")));
  EXPECT_EQ(doc.at("position").at("x"), 0.0);
}

TEST_F(CliTest, TdoaFromTimeDifferences) {
  const auto receivers = write("rx.json", kAnchors);
  const double c = 299'792'458.0;
  const double dd = std::sqrt(10.0) - std::sqrt(2.0);
  const auto tdoa = write("tdoa.json", nlohmann::json{{"time_diffs_s", {dd / c, dd / c}}}.dump());
  const auto r = run_cli({"locate", "--anchors", receivers, "--tdoa", tdoa, "--method", "tdoa", "--out", path("o.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(read_file(path("o.json")));
  EXPECT_NEAR(doc.at("position").at("x").get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(doc.at("position").at("y").get<double>(), 1.0, 1e-6);
}

TEST_F(CliTest, ReproduceWritesDeterministicOutputs) {
  const auto r1 = run_cli({"--seed", "11", "reproduce", "--out-dir", path("r1"), "--sweep-window", "2,10"});
  const auto r2 = run_cli({"--seed", "11", "reproduce", "--out-dir", path("r2")});
  ASSERT_EQ(r1.code, kExitOk) << r1.err;
  ASSERT_EQ(r2.code, kExitOk) << r2.err;
  for (const char* f : {"report.json", "spot_summary.csv", "error_hist.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "r1" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir_ / "r1" / "window_sweep.csv"));
  EXPECT_EQ(read_file(dir_ / "r1" / "report.json"), read_file(dir_ / "r2" / "report.json"));
  const auto summary = read_file(dir_ / "r1" / "spot_summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 1 + 3 * 10);
}

TEST_F(CliTest, DecodeOutputs) {
  const auto ok = run_cli({"decode", "4c000215e2c56db5dffb48d2b060d0f5a71096e000010002c5"});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  const auto doc = nlohmann::json::parse(ok.out);
  EXPECT_EQ(doc.at("protocol"), "ibeacon");
  EXPECT_EQ(doc.at("measured_power_dbm"), -59);

  const auto truncated = run_cli({"decode", "4c0002"});
  EXPECT_EQ(truncated.code, kExitUser);
  EXPECT_NE(truncated.err.find("FrameTooShort"), std::string::npos);

  const auto odd = run_cli({"decode", "4c000"});
  EXPECT_EQ(odd.code, kExitUser);
  EXPECT_NE(odd.err.find("invalid hex"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, kExitUser);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUser);
  EXPECT_EQ(run_cli({"filter", "--in", "x.csv", "--mode", "fancy", "--out", "y.csv"}).code, kExitUser);
  EXPECT_EQ(run_cli({"--set", "bogus=1", "decode", "00"}).code, kExitUser);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
}

}  // namespace
}  // namespace bleloc::cli

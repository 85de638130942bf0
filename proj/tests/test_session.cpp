#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "fluxcal/errors.hpp"
#include "fluxcal/presets.hpp"
#include "fluxcal/session.hpp"
#include "support.hpp"

using namespace fluxcal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fluxcal-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += fs::relative(f, root).string() + "\n" + read_text_file(f);
  return out;
}

Matrix residual2() {
  Matrix m(2, 2);
  m << 1.0, 0.06, -0.04, 1.0;
  return m;
}

CalibrationSession small_calibration(DeviceBackend& dev) {
  auto oc = OptimizerConfig::with_bounds(1, 0.2);
  oc.n_total = 12;
  oc.n_init = 6;
  return calibrate_all(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), oc);
}

// Flip one digit of a middle row of the first sweep.
void tamper(const fs::path& csv) {
  auto text = read_text_file(csv);
  const auto row = text.find('\n', text.size() / 2);
  const auto digit = text.find_first_of("123456789", row + 8);
  text[digit] = text[digit] == '9' ? '8' : static_cast<char>(text[digit] + 1);
  write_text_file(csv, text);
}

}  // namespace

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng) * std::pow(10.0, k % 20 - 10);
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("matrix JSON is row-major") {
  Matrix m(2, 2);
  m << 1.0, 2.0, 3.0, 4.0;
  const auto j = matrix_to_json(m);
  CHECK(j.at("n") == 2);
  CHECK(j.at("entries") == Json::array({1.0, 2.0, 3.0, 4.0}));
  CHECK(matrix_from_json(j) == m);
  CHECK_THROWS(matrix_from_json(Json{{"n", 2}, {"entries", {1.0}}}));
}

TEST_CASE("sweep CSV round-trips exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(3 * 45);
  for (auto& x : v) x = n(rng);
  const SweepRecord r(1, -0.137, 0.02, 3, 45, v);
  const auto csv = sweep_to_csv(r);
  CHECK(csv.rfind("f_prime,ch0,ch1,ch2\n", 0) == 0);
  const auto back = sweep_from_csv(csv, 1, -0.137, 0.02);
  CHECK(std::equal(back.values().begin(), back.values().end(), v.begin(), v.end()));
  CHECK(back.points() == 45);
  CHECK(back.channels() == 3);
}

TEST_CASE("calibration sessions replay exactly and are deterministic") {
  testing::AnalyticBackend dev(residual2(), Vector::Zero(2), 4, testing::mixed_response);
  const auto s = small_calibration(dev);
  REQUIRE(s.complete);
  SessionContext ctx;
  ctx.c_true = CrosstalkMatrix(residual2());
  const auto a = scratch("cal-a");
  const auto b = scratch("cal-b");
  write_calibration_session(a, s, ctx);
  testing::AnalyticBackend dev2(residual2(), Vector::Zero(2), 4, testing::mixed_response);
  write_calibration_session(b, small_calibration(dev2), ctx);
  CHECK(slurp_tree(a) == slurp_tree(b));

  const auto meta = read_json_file(a / "session.json");
  CHECK(meta.at("schema_version") == kSessionSchemaVersion);
  CHECK(fs::exists(a / "sweeps" / "0000.csv"));
  CHECK(fs::exists(a / "sweeps" / "0000.json"));
  CHECK(fs::exists(a / "history.jsonl"));

  const auto r = replay_session(a);
  CHECK_MESSAGE(r.ok, r.mismatch);
  CHECK(r.method == "periodicity");
  CHECK(r.checked > 0);

  tamper(a / "sweeps" / "0003.csv");
  const auto bad = replay_session(a);
  CHECK_FALSE(bad.ok);
  CHECK(bad.mismatch.find("0003.csv") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a partial calibration session replays what it has") {
  testing::AnalyticBackend inner(residual2(), Vector::Zero(2), 4, testing::mixed_response);
  testing::FailingBackend dev(inner, 1000);
  const auto s = small_calibration(dev);
  REQUIRE_FALSE(s.complete);
  const auto dir = scratch("partial");
  write_calibration_session(dir, s, {});
  const auto meta = read_json_file(dir / "session.json");
  CHECK(meta.at("complete") == false);
  const auto r = replay_session(dir);
  CHECK_MESSAGE(r.ok, r.mismatch);
  CHECK_FALSE(r.notes.empty());
  fs::remove_all(dir);
}

TEST_CASE("translation sessions replay exactly") {
  auto cfg = load_preset("paper-3loop");
  SimDevice dev(cfg);
  TranslationRun run;
  run.start = Coordinates::voltages(3);
  run.tracking = cfg.tracking;
  run.result = run_until_converged(dev, run.tracking, 2, 3e-3, run.settings, &run.start, &run.scans);
  run.complete = true;
  SessionContext ctx;
  ctx.c_true = cfg.crosstalk;
  const auto dir = scratch("tr");
  write_translation_session(dir, run, ctx);
  const auto r = replay_session(dir);
  CHECK_MESSAGE(r.ok, r.mismatch);
  CHECK(r.method == "translation");
  tamper(dir / "sweeps" / "0004.csv");
  CHECK_FALSE(replay_session(dir).ok);
  fs::remove_all(dir);
}

TEST_CASE("landscape sessions replay exactly") {
  testing::AnalyticBackend dev(residual2(), Vector::Zero(2), 4, testing::mixed_response);
  LandscapeRun run;
  run.c_init = CrosstalkMatrix::identity(2);
  run.f0_init = FluxVector::zero(2);
  run.loop = 0;
  run.axes = {1};
  run.a_values = {-0.05, 0.0, 0.05};
  run.points = scan_landscape_1d(dev, run.c_init, run.f0_init, 0, 1, run.a_values, run.sweep, &run.sweeps);
  const auto csv = landscape_csv(run);
  CHECK(csv.rfind("omega_1_0,P\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto dir = scratch("land");
  write_landscape_session(dir, run, {});
  CHECK(read_text_file(dir / "landscape" / "scan.csv") == csv);
  const auto r = replay_session(dir);
  CHECK_MESSAGE(r.ok, r.mismatch);
  CHECK(r.method == "landscape");
  fs::remove_all(dir);
}

TEST_CASE("replay rejects directories that are not sessions") {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  CHECK_THROWS(replay_session(dir));
  write_text_file(dir / "session.json", R"({"schema_version": 99, "method": "periodicity"})");
  CHECK_THROWS(replay_session(dir));
  fs::remove_all(dir);
}

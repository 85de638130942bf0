#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fluxcal/calibrator.hpp"
#include "fluxcal/serialization.hpp"
#include "fluxcal/translation.hpp"

namespace fluxcal {

inline constexpr int kSessionSchemaVersion = 1;

// Directory layout:
//   session.json      config, results, matrices
//   sweeps/NNNN.csv   raw sweeps, with NNNN.json metadata next to each
//   history.jsonl     optimizer evaluations (periodicity sessions)
//   landscape/*.csv   P tables (landscape sessions)
struct SessionContext {
  // Run configuration snapshot, stored verbatim under "config".
  Json config = Json::object();
  // Ground truth, known only for simulated backends.
  std::optional<CrosstalkMatrix> c_true;
};

Json optimizer_to_json(const OptimizerConfig& c);
Json sweep_settings_to_json(const SweepSettings& s);
Json translation_settings_to_json(const TranslationSettings& s);
TranslationSettings translation_settings_from_json(const Json& j);
Json tracking_to_json(const std::vector<TrackingFeature>& tracking);
std::vector<TrackingFeature> tracking_from_json(const Json& j);

// C_true * estimate^-1 - I
Matrix truth_error(const CrosstalkMatrix& c_true, const CrosstalkMatrix& estimate);

void write_calibration_session(const std::filesystem::path& dir, const CalibrationSession& session,
                               const SessionContext& ctx);

struct TranslationRun {
  Coordinates start;
  TranslationSettings settings;
  std::vector<TrackingFeature> tracking;
  TranslationResult result;
  std::vector<TrackingScan> scans;
  bool complete = false;
  std::string error;
};

void write_translation_session(const std::filesystem::path& dir, const TranslationRun& run,
                               const SessionContext& ctx);

struct LandscapeRun {
  CrosstalkMatrix c_init = CrosstalkMatrix::identity(1);
  FluxVector f0_init;
  SweepSettings sweep;
  Index loop = 0;
  // One entry for a 1D scan, two for a 2D grid.
  std::vector<Index> axes;
  std::vector<double> a_values;
  std::vector<double> b_values;
  // Row-major over (a, b) for 2D scans.
  std::vector<LandscapePoint> points;
  std::vector<LoggedSweep> sweeps;
};

// The P table goes to landscape/scan.csv: one row per point, header
// "omega_<j>_<i>,...,P".
std::string landscape_csv(const LandscapeRun& run);
void write_landscape_session(const std::filesystem::path& dir, const LandscapeRun& run, const SessionContext& ctx);

struct ReplayReport {
  bool ok = true;
  std::string method;
  std::size_t checked = 0;
  // First disagreement between persisted and recomputed numbers.
  std::string mismatch;
  std::vector<std::string> notes;
};

// Recomputes every derived number from the persisted raw sweeps and compares
// for exact equality. Incomplete loops or iterations are skipped with a note.
// Throws on unreadable or malformed sessions.
ReplayReport replay_session(const std::filesystem::path& dir);

}  // namespace fluxcal

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fluxcal/device.hpp"
#include "fluxcal/flux_coordinates.hpp"
#include "fluxcal/optimizers.hpp"
#include "fluxcal/periodicity.hpp"

namespace fluxcal {

struct OffSweepHints {
  // Flux-insensitive point per loop in trial coordinates; zero when empty.
  std::vector<double> symmetry_points;
  double distance = 0.15;
  // Per-loop value used verbatim instead of the heuristic.
  std::vector<std::optional<double>> overrides;
};

// Fixed trial-coordinate values for loops that are not being swept.
std::vector<double> choose_off_sweep_biases(Index loops, const OffSweepHints& hints = {});

struct SweepPlan {
  Index loop = 0;
  double start = 0.0;
  double span = 2.2;  // f'_i units
  double delta = 0.02;
  // Trial coordinates of every loop; the swept entry is ignored.
  std::vector<double> fixed;
  std::vector<std::size_t> channels;

  static constexpr std::size_t kMinPoints = 40;
  std::size_t points() const;
  // Throws DimensionError.
  void validate(Index loops, std::size_t channel_count) const;
};

enum class SweepRole { primary, shifted, final };
std::string to_string(SweepRole role);
SweepRole sweep_role_from_string(const std::string& s);

struct LoggedSweep {
  SweepRole role = SweepRole::primary;
  // Evaluation step inside the loop's history; final sweeps use the history size.
  std::size_t step = 0;
  std::vector<double> params;
  SweepRecord record;
};

struct PeriodicityMeasurement {
  double score = -1.0;
  bool failed = false;
  std::string failure;
  std::optional<PeriodFit> fit;
  double period = 0.0;  // tau_max * delta
};

// One sweep of f'_i from `start` with the other trial fluxes at plan.fixed.
SweepRecord run_sweep(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                      const TrialCompensation& omega, const SweepPlan& plan, double start);

// Sweeps f'_i under compensation `omega`, fits the correlation peak and
// re-sweeps shifted by the fitted period. A fit or scoring failure yields the
// sentinel score -1 with `failed` set. Sweeps are appended to `log`.
PeriodicityMeasurement measure_periodicity_objective(DeviceBackend& backend, const CrosstalkMatrix& c_init,
                                                     const FluxVector& f0_init, const TrialCompensation& omega,
                                                     const SweepPlan& plan, std::vector<LoggedSweep>* log = nullptr,
                                                     std::size_t step = 0, SweepRole first = SweepRole::primary);

// Pure analysis half of the objective: the fit of a primary sweep and the
// score of a primary/shifted pair. Shared with session replay.
PeriodFit analyze_primary(const SweepRecord& primary);
double shifted_start(const SweepRecord& primary, const PeriodFit& fit);

struct SweepSettings {
  double delta = 0.02;
  double span_periods = 2.2;
  double period_guess = 1.0;
  // Re-derive the span from the first successful period fit.
  bool refine_span = true;
  OffSweepHints hints;
  // All channels when empty.
  std::vector<std::size_t> channels;
};

SweepPlan plan_for_loop(Index loop, Index loops, std::size_t channel_count, const SweepSettings& settings,
                        double period);

struct LoopRun {
  LoopCalibrationResult result;
  std::vector<LoggedSweep> sweeps;
  bool complete = false;
  std::string error;
};

// Optimizes the N-1 compensation parameters of loop i, then measures the
// period at the chosen optimum. On optimizer abort the partial history is
// kept and `complete` stays false.
LoopRun calibrate_loop(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init, Index loop,
                       const OptimizerConfig& optimizer, const SweepSettings& sweep);

struct CalibrationSession {
  std::string method = "periodicity";
  CrosstalkMatrix c_init = CrosstalkMatrix::identity(1);
  FluxVector f0_init;
  OptimizerConfig optimizer;
  SweepSettings sweep;
  std::vector<LoopRun> loops;
  std::optional<CrosstalkMatrix> residual_estimate;
  std::optional<CrosstalkMatrix> updated_estimate;
  bool complete = false;
};

// Per-loop optimizer seeds derive from optimizer.seed and the loop index.
std::uint64_t loop_seed(std::uint64_t seed, Index loop);

CalibrationSession calibrate_all(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                                 const OptimizerConfig& optimizer, const SweepSettings& sweep = {});

struct LandscapePoint {
  std::vector<double> params;  // all N-1 parameters of the target loop
  double score = -1.0;
  bool failed = false;
};

// P along Omega_{j,i} with every other parameter at zero. Sweeps of point k
// are logged with step k.
std::vector<LandscapePoint> scan_landscape_1d(DeviceBackend& backend, const CrosstalkMatrix& c_init,
                                              const FluxVector& f0_init, Index loop, Index j,
                                              const std::vector<double>& values, const SweepSettings& sweep = {},
                                              std::vector<LoggedSweep>* log = nullptr);

// P over the grid (a_values x b_values) of Omega_{a,i}, Omega_{b,i};
// row r, column c of the result is (a_values[r], b_values[c]), logged with
// step r * b_values.size() + c.
Matrix scan_landscape_2d(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init, Index loop,
                         Index a, Index b, const std::vector<double>& a_values, const std::vector<double>& b_values,
                         const SweepSettings& sweep = {}, std::vector<LoggedSweep>* log = nullptr);

}  // namespace fluxcal

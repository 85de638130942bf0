#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fluxcal/device.hpp"
#include "fluxcal/periodicity.hpp"
#include "fluxcal/sim_device.hpp"
#include "fluxcal/types.hpp"

namespace fluxcal {

// Control coordinates g = C V + f0. Iteration k measures in the coordinates
// left by iteration k-1; the first iteration starts from raw voltages.
struct Coordinates {
  CrosstalkMatrix c = CrosstalkMatrix::identity(1);
  FluxVector f0;

  static Coordinates voltages(Index n);
  VoltageVector to_voltages(const FluxVector& g) const;
};

struct TranslationSettings {
  // Scan resolution is delta / 4.
  double delta = 0.02;
  // Offsets of the swept coordinate j from its parking value, in whole
  // periods so that the loop-j response itself is unchanged.
  std::vector<double> steps{-1.0, 0.0, 1.0};
  // Half-width of the local scan around a predicted feature position.
  double window = 0.2;
  // A line fit whose worst residual exceeds this flags low confidence.
  double max_residual = 0.02;

  double resolution() const { return delta / 4.0; }
};

struct FeatureScan {
  double position = 0.0;
  double depth = 0.0;
};

enum class ScanRole { first, next, coupling };
std::string to_string(ScanRole role);
ScanRole scan_role_from_string(const std::string& s);

// Raw single-channel scan behind one feature position.
struct TrackingScan {
  std::size_t iteration = 0;
  ScanRole role = ScanRole::first;
  Index swept = -1;  // coupling scans: loop j and its value g_j
  double swept_value = 0.0;
  SweepRecord record;
};

// Minimum of a single-channel scan with parabolic interpolation around the
// discrete minimum. Throws FitError on a flat signal or an edge minimum.
FeatureScan feature_from_scan(const SweepRecord& scan);

// Scans g_loop over [center - half_width, center + half_width] with the
// other coordinates at `g` and locates the minimum of `channel`. `sink`
// sees the raw scan before it is analyzed.
using ScanSink = std::function<void(const SweepRecord&)>;
FeatureScan locate_feature(DeviceBackend& backend, const Coordinates& coords, FluxVector g, Index loop,
                           std::size_t channel, double center, double half_width, double resolution,
                           const ScanSink& sink = {});

struct CouplingEstimate {
  Index swept = 0;
  std::vector<double> values;     // g_j
  std::vector<double> positions;  // tracked g_i
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
  bool low_confidence = false;
};

// Tracks the feature of `feature.loop` while coordinate j steps through
// settings.steps around its parking value; a line through the positions
// gives slope d g_i / d g_j = -C'_ij / C'_ii.
CouplingEstimate estimate_coupling(DeviceBackend& backend, const Coordinates& coords, const TrackingFeature& feature,
                                   Index j, double anchor, const TranslationSettings& settings,
                                   std::vector<TrackingScan>* log = nullptr, std::size_t iteration = 0);

// Least-squares line through tracked positions.
CouplingEstimate fit_coupling(Index swept, std::vector<double> values, std::vector<double> positions,
                              double max_residual);

struct ElementDiagnostics {
  Index loop = 0;
  std::size_t channel = 0;
  double position = 0.0;
  double period = 0.0;
  std::vector<CouplingEstimate> couplings;
};

struct IterationEstimate {
  std::size_t index = 0;
  CrosstalkMatrix c_prime;
  FluxVector f0_prime;
  std::vector<ElementDiagnostics> diagnostics;
  bool low_confidence = false;
};

// Row `diag.loop` of C' and f0' from the tracked positions.
void assemble_row(const ElementDiagnostics& diag, const TrackingFeature& feature, Matrix& c_prime, Vector& f0_prime);

// Every loop needs a tracking entry. Any tracking failure propagates.
IterationEstimate run_iteration(DeviceBackend& backend, const Coordinates& coords,
                                const std::vector<TrackingFeature>& tracking, const TranslationSettings& settings,
                                std::size_t index = 1, std::vector<TrackingScan>* log = nullptr);

// g' = C' g + f0'
Coordinates compose(const Coordinates& coords, const IterationEstimate& estimate);

struct TranslationResult {
  std::vector<IterationEstimate> iterations;
  // C_ref = C(n)' ... C(1)' applied to the starting coordinates.
  Coordinates reference;
  bool converged = false;
};

// Iterates until max |C(k)' - I| < tol or max_iters is reached. Throws
// DimensionError for max_iters == 0.
TranslationResult run_until_converged(DeviceBackend& backend, const std::vector<TrackingFeature>& tracking,
                                      std::size_t max_iters, double tol, const TranslationSettings& settings = {},
                                      const Coordinates* start = nullptr, std::vector<TrackingScan>* log = nullptr);

// C(n)' ... C(1)'
CrosstalkMatrix product_of_estimates(const std::vector<IterationEstimate>& iterations);

double max_abs_off_diagonal(const Matrix& m);

}  // namespace fluxcal

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fluxcal/kernels.hpp"
#include "fluxcal/types.hpp"

namespace fluxcal {

// Multi-channel readout collected along one swept trial coordinate.
// Values are channel-major: value(l, s) = values[l * points + s], taken at
// f'_i = start + s * delta.
class SweepRecord {
 public:
  static constexpr std::size_t kMinPoints = 8;

  SweepRecord(Index loop, double start, double delta, std::size_t channels, std::size_t points,
              std::vector<double> values);

  Index loop() const { return loop_; }
  double start() const { return start_; }
  double delta() const { return delta_; }
  std::size_t channels() const { return channels_; }
  std::size_t points() const { return points_; }
  double coordinate(std::size_t s) const { return start_ + static_cast<double>(s) * delta_; }
  double value(std::size_t l, std::size_t s) const { return values_[l * points_ + s]; }
  std::span<const double> channel(std::size_t l) const { return {values_.data() + l * points_, points_}; }
  std::span<const double> values() const { return values_; }

 private:
  Index loop_;
  double start_;
  double delta_;
  std::size_t channels_;
  std::size_t points_;
  std::vector<double> values_;
};

struct NormalizedSweep {
  SweepRecord record;
  std::vector<std::size_t> kept;     // source channel index of each output channel
  std::vector<std::size_t> dropped;  // constant channels removed
};

// Zero-mean, unit sum-of-squares per channel; constant channels are dropped.
// Throws DimensionError when every channel is constant.
NormalizedSweep normalize_channels(const SweepRecord& record);

// Pooled correlation of the normalized record with its t-step translation.
// Requires 1 <= t <= points - kMinOverlap. Zero pooled variance yields 0.
inline constexpr std::size_t kMinOverlap = 4;
double correlation_at_lag(const SweepRecord& record, std::size_t lag);

struct CorrelationCurve {
  std::size_t record_length = 0;
  std::size_t first_lag = 0;
  std::vector<double> values;

  std::size_t last_lag() const { return first_lag + values.size() - 1; }
  double at(std::size_t lag) const { return values[lag - first_lag]; }
};

CorrelationCurve correlation_curve(const SweepRecord& record, std::size_t first_lag, std::size_t last_lag,
                                   kernels::Exec exec = kernels::Exec::parallel);

// Full admissible lag range [1, points - kMinOverlap].
CorrelationCurve correlation_curve(const SweepRecord& record, kernels::Exec exec = kernels::Exec::parallel);

struct FitOptions {
  std::size_t half_window = 5;
  // Kink grid spacing in lag units (0.01 lag = delta / 100).
  double resolution = 0.01;
  // Peak search restricted to lags in [lo * m, hi * m].
  double search_lo = 0.25;
  double search_hi = 0.75;
  // Fewer points than this on either side of the peak is a failure.
  std::size_t min_side = 2;
};

// rho(tau) = rho_max + slope * |tau - tau_max| fitted around the peak.
struct PeriodFit {
  double rho_max = 0.0;
  double slope = 0.0;
  double tau = 0.0;  // lag units
  std::size_t window_first = 0;
  std::size_t window_last = 0;
  double sse = 0.0;
};

// Throws FitError.
PeriodFit fit_period(const CorrelationCurve& curve, const FitOptions& options = {});

// Pooled correlation between two aligned sweeps (per-channel means over all
// points). Channels constant in either record are ignored. Throws
// DimensionError on shape mismatch or when nothing varies.
double score_periodicity(const SweepRecord& original, const SweepRecord& shifted);

}  // namespace fluxcal

#include "fluxcal/periodicity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fluxcal/errors.hpp"
#include "fluxcal/log.hpp"

namespace fluxcal {

SweepRecord::SweepRecord(Index loop, double start, double delta, std::size_t channels, std::size_t points,
                         std::vector<double> values)
    : loop_(loop), start_(start), delta_(delta), channels_(channels), points_(points), values_(std::move(values)) {
  if (channels_ == 0) throw DimensionError("sweep has no channels");
  if (points_ < kMinPoints) throw DimensionError("sweep needs at least 8 points");
  if (!(delta_ > 0.0) || !std::isfinite(delta_)) throw DimensionError("sweep step must be positive");
  if (values_.size() != channels_ * points_) throw DimensionError("sweep value count does not match its shape");
  for (double v : values_) {
    if (std::isnan(v)) throw DimensionError("sweep contains NaN readout");
  }
}

namespace {

// Channel is constant when its deviations vanish relative to its magnitude.
bool is_constant(std::span<const double> x, double ss) {
  if (ss == 0.0) return true;
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  return ss <= 1e-26 * scale * scale * static_cast<double>(x.size());
}

}  // namespace

NormalizedSweep normalize_channels(const SweepRecord& record) {
  const std::size_t m = record.points();
  std::vector<double> out;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
  out.reserve(record.values().size());
  for (std::size_t l = 0; l < record.channels(); ++l) {
    const auto x = record.channel(l);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    if (is_constant(x, ss)) {
      dropped.push_back(l);
      continue;
    }
    const double norm = std::sqrt(ss);
    for (double v : x) out.push_back((v - mean) / norm);
    kept.push_back(l);
  }
  if (kept.empty()) throw DimensionError("every channel of the sweep is constant");
  if (!dropped.empty()) {
    log::debug("dropped " + std::to_string(dropped.size()) + " constant channel(s) from sweep of loop " +
               std::to_string(record.loop()));
  }
  return {SweepRecord(record.loop(), record.start(), record.delta(), kept.size(), m, std::move(out)),
          std::move(kept), std::move(dropped)};
}

double correlation_at_lag(const SweepRecord& record, std::size_t lag) {
  if (lag < 1 || lag + kMinOverlap > record.points()) {
    throw DimensionError("lag " + std::to_string(lag) + " leaves fewer than 4 overlapping points");
  }
  const auto norm = normalize_channels(record);
  const double rho = kernels::lag_correlation(norm.record.values(), norm.record.channels(), norm.record.points(), lag);
  if (std::isnan(rho)) {
    log::warn("zero pooled variance at lag " + std::to_string(lag) + "; correlation set to 0");
    return 0.0;
  }
  return rho;
}

CorrelationCurve correlation_curve(const SweepRecord& record, std::size_t first_lag, std::size_t last_lag,
                                   kernels::Exec exec) {
  if (first_lag < 1 || last_lag < first_lag || last_lag + kMinOverlap > record.points()) {
    throw DimensionError("empty or out-of-range lag range");
  }
  const auto norm = normalize_channels(record);
  CorrelationCurve curve{record.points(), first_lag, std::vector<double>(last_lag - first_lag + 1)};
  const auto data = norm.record.values();
  if (exec == kernels::Exec::parallel) {
    kernels::correlation_curve_parallel(data, norm.record.channels(), record.points(), first_lag, curve.values);
  } else {
    kernels::correlation_curve_serial(data, norm.record.channels(), record.points(), first_lag, curve.values);
  }
  for (double& v : curve.values) {
    if (std::isnan(v)) v = 0.0;
  }
  return curve;
}

CorrelationCurve correlation_curve(const SweepRecord& record, kernels::Exec exec) {
  return correlation_curve(record, 1, record.points() - kMinOverlap, exec);
}

PeriodFit fit_period(const CorrelationCurve& curve, const FitOptions& options) {
  if (curve.values.empty()) throw FitError("empty correlation curve");
  const double m = static_cast<double>(curve.record_length);
  const auto lo = std::max(curve.first_lag, static_cast<std::size_t>(std::ceil(options.search_lo * m)));
  const auto hi = std::min(curve.last_lag(), static_cast<std::size_t>(std::floor(options.search_hi * m)));
  if (lo > hi) throw FitError("peak search range is empty");

  std::size_t peak = lo;
  for (std::size_t t = lo + 1; t <= hi; ++t) {
    if (curve.at(t) > curve.at(peak)) peak = t;
  }
  // A maximum pinned to the search edge is widened outward, uphill, to the
  // nearest local maximum of the full curve. Climbing off either end of the
  // curve means there is no peak to fit.
  if (peak == lo) {
    while (peak > curve.first_lag && curve.at(peak - 1) > curve.at(peak)) --peak;
  }
  if (peak == hi) {
    while (peak < curve.last_lag() && curve.at(peak + 1) > curve.at(peak)) ++peak;
  }
  if ((peak == curve.first_lag && peak < lo) || (peak == curve.last_lag() && peak > hi)) {
    throw FitError("correlation has no interior maximum near the search range");
  }

  const std::size_t first = peak >= curve.first_lag + options.half_window ? peak - options.half_window
                                                                          : curve.first_lag;
  const std::size_t last = std::min(peak + options.half_window, curve.last_lag());
  if (peak - first < options.min_side || last - peak < options.min_side) {
    throw FitError("not enough lags around the correlation maximum");
  }

  const std::size_t count = last - first + 1;
  double ymin = curve.at(first);
  double ymax = ymin;
  double ysum = 0.0;
  for (std::size_t t = first; t <= last; ++t) {
    ymin = std::min(ymin, curve.at(t));
    ymax = std::max(ymax, curve.at(t));
    ysum += curve.at(t);
  }
  if (ymax - ymin <= 1e-14) throw FitError("correlation curve is flat around its maximum");
  const double ymean = ysum / static_cast<double>(count);

  const auto steps = static_cast<std::size_t>(
      std::llround(static_cast<double>(last - first) / options.resolution));
  PeriodFit best;
  bool have = false;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double tau = static_cast<double>(first) + static_cast<double>(k) * options.resolution;
    double xmean = 0.0;
    for (std::size_t t = first; t <= last; ++t) xmean += std::abs(static_cast<double>(t) - tau);
    xmean /= static_cast<double>(count);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t t = first; t <= last; ++t) {
      const double dx = std::abs(static_cast<double>(t) - tau) - xmean;
      sxx += dx * dx;
      sxy += dx * (curve.at(t) - ymean);
    }
    if (!(sxx > 0.0)) continue;
    const double slope = sxy / sxx;
    const double intercept = ymean - slope * xmean;
    double sse = 0.0;
    for (std::size_t t = first; t <= last; ++t) {
      const double r = curve.at(t) - (intercept + slope * std::abs(static_cast<double>(t) - tau));
      sse += r * r;
    }
    if (!have || sse < best.sse) {
      best = PeriodFit{intercept, slope, tau, first, last, sse};
      have = true;
    }
  }
  if (!have) throw FitError("degenerate fit window");
  if (best.slope > 0.0) throw FitError("fitted kink is a minimum, not a peak");
  best.rho_max = std::clamp(best.rho_max, -1.0, 1.0);
  return best;
}

double score_periodicity(const SweepRecord& original, const SweepRecord& shifted) {
  if (original.channels() != shifted.channels() || original.points() != shifted.points()) {
    throw DimensionError("sweeps differ in shape");
  }
  if (std::abs(original.delta() - shifted.delta()) > 1e-12 * original.delta()) {
    throw DimensionError("sweeps differ in step size");
  }
  const std::size_t m = original.points();
  std::vector<double> a;
  std::vector<double> b;
  a.reserve(original.values().size());
  b.reserve(original.values().size());
  std::size_t used = 0;
  for (std::size_t l = 0; l < original.channels(); ++l) {
    const auto x = original.channel(l);
    const auto y = shifted.channel(l);
    auto stats = [m](std::span<const double> v) {
      double mean = 0.0;
      for (double e : v) mean += e;
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (double e : v) ss += (e - mean) * (e - mean);
      return std::pair{mean, ss};
    };
    const auto [mx, sx] = stats(x);
    const auto [my, sy] = stats(y);
    if (is_constant(x, sx) || is_constant(y, sy)) continue;
    const double nx = std::sqrt(sx);
    const double ny = std::sqrt(sy);
    for (double e : x) a.push_back((e - mx) / nx);
    for (double e : y) b.push_back((e - my) / ny);
    ++used;
  }
  if (used == 0) throw DimensionError("no varying channel in either sweep");
  const double p = kernels::pooled_correlation(a, b, used, m);
  if (std::isnan(p)) throw DimensionError("zero pooled variance");
  return std::clamp(p, -1.0, 1.0);
}

}  // namespace fluxcal

#include "fluxcal/translation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fluxcal/errors.hpp"
#include "fluxcal/log.hpp"

namespace fluxcal {

Coordinates Coordinates::voltages(Index n) { return {CrosstalkMatrix::identity(n), FluxVector::zero(n)}; }

VoltageVector Coordinates::to_voltages(const FluxVector& g) const {
  return VoltageVector(c.entries().partialPivLu().solve(g.values() - f0.values()));
}

std::string to_string(ScanRole role) {
  switch (role) {
    case ScanRole::first: return "first";
    case ScanRole::next: return "next";
    case ScanRole::coupling: return "coupling";
  }
  return "first";
}

ScanRole scan_role_from_string(const std::string& s) {
  if (s == "first") return ScanRole::first;
  if (s == "next") return ScanRole::next;
  if (s == "coupling") return ScanRole::coupling;
  throw DimensionError("unknown scan role '" + s + "'");
}

FeatureScan feature_from_scan(const SweepRecord& scan) {
  const auto y = scan.channel(0);
  const std::size_t last = y.size() - 1;
  const auto lo = std::min_element(y.begin(), y.end());
  const auto hi = std::max_element(y.begin(), y.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi))) {
    throw FitError("scan along loop " + std::to_string(scan.loop()) + " is flat");
  }
  const auto k = static_cast<std::size_t>(lo - y.begin());
  if (k == 0 || k == last) {
    throw FitError("feature of loop " + std::to_string(scan.loop()) + " lies on the scan edge");
  }
  const double a = y[k - 1];
  const double b = y[k];
  const double c = y[k + 1];
  const double curvature = a - 2.0 * b + c;
  const double offset = curvature > 0.0 ? std::clamp(0.5 * (a - c) / curvature, -0.5, 0.5) : 0.0;
  return {scan.start() + (static_cast<double>(k) + offset) * scan.delta(), *hi - *lo};
}

FeatureScan locate_feature(DeviceBackend& backend, const Coordinates& coords, FluxVector g, Index loop,
                           std::size_t channel, double center, double half_width, double resolution,
                           const ScanSink& sink) {
  if (!(resolution > 0.0) || !(half_width > resolution)) throw DimensionError("scan window must exceed its step");
  const auto steps = static_cast<std::size_t>(std::llround(2.0 * half_width / resolution));
  const double start = center - half_width;
  const std::size_t ch[] = {channel};
  std::vector<double> y(steps + 1);
  for (std::size_t s = 0; s <= steps; ++s) {
    g[loop] = start + static_cast<double>(s) * resolution;
    backend.set_voltages(coords.to_voltages(g));
    y[s] = backend.measure(ch)[0];
  }
  SweepRecord record(loop, start, resolution, 1, steps + 1, std::move(y));
  if (sink) sink(record);
  return feature_from_scan(record);
}

namespace {

FluxVector parking(const TrackingFeature& feature, Index n) {
  if (static_cast<Index>(feature.bias.size()) != n) throw DimensionError("tracking bias has the wrong length");
  FluxVector g = FluxVector::zero(n);
  for (Index k = 0; k < n; ++k) g[k] = feature.bias[static_cast<std::size_t>(k)];
  return g;
}

ScanSink sink_for(std::vector<TrackingScan>* log, std::size_t iteration, ScanRole role, Index swept = -1,
                  double value = 0.0) {
  if (!log) return {};
  return [=](const SweepRecord& r) { log->push_back({iteration, role, swept, value, r}); };
}

}  // namespace

CouplingEstimate estimate_coupling(DeviceBackend& backend, const Coordinates& coords, const TrackingFeature& feature,
                                   Index j, double anchor, const TranslationSettings& settings,
                                   std::vector<TrackingScan>* log, std::size_t iteration) {
  const Index n = backend.loop_count();
  const Index i = feature.loop;
  if (j == i || j < 0 || j >= n) throw DimensionError("coupling needs a different loop to sweep");
  if (settings.steps.size() < 2) throw DimensionError("coupling needs at least two sweep values");
  std::vector<double> values;
  std::vector<double> positions;
  FluxVector g = parking(feature, n);
  const double park = g[j];
  std::vector<double> order(settings.steps);
  std::sort(order.begin(), order.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  // Nearest steps first so each prediction extrapolates from tracked points.
  for (double step : order) {
    g[j] = park + step;
    double predicted = anchor;
    if (values.size() >= 2) {
      const double dv = values[1] - values[0];
      predicted = positions[0] + (g[j] - values[0]) * (positions[1] - positions[0]) / dv;
    } else if (values.size() == 1) {
      predicted = positions[0];
    }
    const auto scan = locate_feature(backend, coords, g, i, feature.channel, predicted, settings.window,
                                     settings.resolution(), sink_for(log, iteration, ScanRole::coupling, j, g[j]));
    values.push_back(g[j]);
    positions.push_back(scan.position);
  }
  return fit_coupling(j, std::move(values), std::move(positions), settings.max_residual);
}

CouplingEstimate fit_coupling(Index swept, std::vector<double> values, std::vector<double> positions,
                              double max_residual) {
  if (values.size() != positions.size() || values.size() < 2) throw DimensionError("coupling needs two tracked points");
  CouplingEstimate out;
  out.swept = swept;
  out.values = std::move(values);
  out.positions = std::move(positions);
  const auto m = static_cast<double>(out.values.size());
  double xm = 0.0;
  double ym = 0.0;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    xm += out.values[k];
    ym += out.positions[k];
  }
  xm /= m;
  ym /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    sxx += (out.values[k] - xm) * (out.values[k] - xm);
    sxy += (out.values[k] - xm) * (out.positions[k] - ym);
  }
  if (!(sxx > 0.0)) throw DimensionError("coupling sweep values must differ");
  out.slope = sxy / sxx;
  out.intercept = ym - out.slope * xm;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    out.max_residual =
        std::max(out.max_residual, std::abs(out.positions[k] - (out.intercept + out.slope * out.values[k])));
  }
  out.low_confidence = out.max_residual > max_residual;
  if (out.low_confidence) {
    log::warn("tracking against loop " + std::to_string(swept) + " is not linear (residual " +
              std::to_string(out.max_residual) + ")");
  }
  return out;
}

void assemble_row(const ElementDiagnostics& diag, const TrackingFeature& feature, Matrix& c_prime, Vector& f0_prime) {
  const Index i = diag.loop;
  if (!(diag.period > 0.0)) throw FitError("tracked feature of loop " + std::to_string(i) + " has no period");
  const FluxVector g = parking(feature, c_prime.rows());
  const double cii = 1.0 / diag.period;
  c_prime(i, i) = cii;
  double f = cii * diag.position;
  for (const auto& est : diag.couplings) {
    c_prime(i, est.swept) = -est.slope * cii;
    f += c_prime(i, est.swept) * g[est.swept];
  }
  // Offsets are only defined modulo one flux quantum.
  const double off = feature.feature_flux - f;
  f0_prime[i] = off - std::round(off);
}

IterationEstimate run_iteration(DeviceBackend& backend, const Coordinates& coords,
                                const std::vector<TrackingFeature>& tracking, const TranslationSettings& settings,
                                std::size_t index, std::vector<TrackingScan>* log) {
  const Index n = backend.loop_count();
  if (coords.c.size() != n || coords.f0.size() != n) throw DimensionError("coordinates do not match the device");
  Matrix c_prime = Matrix::Zero(n, n);
  Vector f0_prime = Vector::Zero(n);
  std::vector<ElementDiagnostics> diagnostics;
  bool low = false;
  for (Index i = 0; i < n; ++i) {
    const auto it = std::find_if(tracking.begin(), tracking.end(), [i](const TrackingFeature& t) { return t.loop == i; });
    if (it == tracking.end()) throw DimensionError("no tracking feature for loop " + std::to_string(i));
    const auto& feature = *it;
    const FluxVector g = parking(feature, n);
    ElementDiagnostics diag;
    diag.loop = i;
    diag.channel = feature.channel;

    // The first sighting scans one and a half periods; retry shifted by half
    // a period if the deepest point sits on the edge.
    const double res = settings.resolution();
    FeatureScan first;
    try {
      first = locate_feature(backend, coords, g, i, feature.channel, 0.5, 0.75, res,
                             sink_for(log, index, ScanRole::first));
    } catch (const FitError&) {
      first = locate_feature(backend, coords, g, i, feature.channel, 0.0, 0.75, res,
                             sink_for(log, index, ScanRole::first));
    }
    const auto next = locate_feature(backend, coords, g, i, feature.channel, first.position + 1.0, settings.window,
                                     res, sink_for(log, index, ScanRole::next));
    diag.position = first.position;
    diag.period = next.position - first.position;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      diag.couplings.push_back(estimate_coupling(backend, coords, feature, j, first.position, settings, log, index));
      low = low || diag.couplings.back().low_confidence;
    }
    assemble_row(diag, feature, c_prime, f0_prime);
    diagnostics.push_back(std::move(diag));
  }
  return {index, CrosstalkMatrix(c_prime), FluxVector(f0_prime), std::move(diagnostics), low};
}

Coordinates compose(const Coordinates& coords, const IterationEstimate& estimate) {
  const Matrix& cp = estimate.c_prime.entries();
  return {CrosstalkMatrix(cp * coords.c.entries()), FluxVector(cp * coords.f0.values() + estimate.f0_prime.values())};
}

CrosstalkMatrix product_of_estimates(const std::vector<IterationEstimate>& iterations) {
  if (iterations.empty()) throw DimensionError("no iterations to multiply");
  Matrix p = iterations.front().c_prime.entries();
  for (std::size_t k = 1; k < iterations.size(); ++k) p = iterations[k].c_prime.entries() * p;
  return CrosstalkMatrix(p);
}

double max_abs_off_diagonal(const Matrix& m) {
  double out = 0.0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (r != c) out = std::max(out, std::abs(m(r, c)));
    }
  }
  return out;
}

TranslationResult run_until_converged(DeviceBackend& backend, const std::vector<TrackingFeature>& tracking,
                                      std::size_t max_iters, double tol, const TranslationSettings& settings,
                                      const Coordinates* start, std::vector<TrackingScan>* log) {
  if (max_iters == 0) throw DimensionError("max_iters must be at least 1");
  const Index n = backend.loop_count();
  TranslationResult out{{}, start ? *start : Coordinates::voltages(n), false};
  for (std::size_t k = 1; k <= max_iters; ++k) {
    auto est = run_iteration(backend, out.reference, tracking, settings, k, log);
    out.reference = compose(out.reference, est);
    const double dev = (est.c_prime.entries() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    out.iterations.push_back(std::move(est));
    log::info("translation iteration " + std::to_string(k) + ": max |C' - I| = " + std::to_string(dev));
    if (dev < tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) log::warn("translation baseline did not converge within " + std::to_string(max_iters) + " iterations");
  return out;
}

}  // namespace fluxcal

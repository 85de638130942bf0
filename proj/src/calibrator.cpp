#include "fluxcal/calibrator.hpp"

#include <cmath>
#include <exception>

#include "fluxcal/errors.hpp"
#include "fluxcal/log.hpp"

namespace fluxcal {

std::vector<double> choose_off_sweep_biases(Index loops, const OffSweepHints& hints) {
  std::vector<double> out(static_cast<std::size_t>(loops), hints.distance);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (k < hints.symmetry_points.size()) out[k] += hints.symmetry_points[k];
    if (k < hints.overrides.size() && hints.overrides[k]) out[k] = *hints.overrides[k];
  }
  return out;
}

std::size_t SweepPlan::points() const {
  if (!(delta > 0.0) || !(span > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(span / delta + 0.5));
}

void SweepPlan::validate(Index loops, std::size_t channel_count) const {
  if (loop < 0 || loop >= loops) throw DimensionError("sweep loop out of range");
  if (!(delta > 0.0)) throw DimensionError("sweep step must be positive");
  if (points() < kMinPoints) throw DimensionError("sweep needs at least 40 points");
  if (static_cast<Index>(fixed.size()) != loops) throw DimensionError("fixed biases do not match loop count");
  if (channels.empty()) throw DimensionError("sweep has no channels");
  for (auto c : channels) {
    if (c >= channel_count) throw DimensionError("sweep channel out of range");
  }
}

std::string to_string(SweepRole role) {
  switch (role) {
    case SweepRole::primary: return "primary";
    case SweepRole::shifted: return "shifted";
    case SweepRole::final: return "final";
  }
  return "primary";
}

SweepRole sweep_role_from_string(const std::string& s) {
  if (s == "primary") return SweepRole::primary;
  if (s == "shifted") return SweepRole::shifted;
  if (s == "final") return SweepRole::final;
  throw DimensionError("unknown sweep role '" + s + "'");
}

SweepRecord run_sweep(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                      const TrialCompensation& omega, const SweepPlan& plan, double start) {
  const std::size_t m = plan.points();
  const std::size_t channels = plan.channels.size();
  std::vector<double> values(channels * m);
  Vector trial(static_cast<Index>(plan.fixed.size()));
  for (std::size_t k = 0; k < plan.fixed.size(); ++k) trial[static_cast<Index>(k)] = plan.fixed[k];
  for (std::size_t s = 0; s < m; ++s) {
    trial[plan.loop] = start + static_cast<double>(s) * plan.delta;
    backend.set_voltages(voltages_for_trial_flux(c_init, f0_init, omega, FluxVector(trial)));
    const auto r = backend.measure(plan.channels);
    for (std::size_t l = 0; l < channels; ++l) values[l * m + s] = r[l];
  }
  return SweepRecord(plan.loop, start, plan.delta, channels, m, std::move(values));
}

PeriodFit analyze_primary(const SweepRecord& primary) { return fit_period(correlation_curve(primary)); }

double shifted_start(const SweepRecord& primary, const PeriodFit& fit) {
  return primary.start() + fit.tau * primary.delta();
}

PeriodicityMeasurement measure_periodicity_objective(DeviceBackend& backend, const CrosstalkMatrix& c_init,
                                                     const FluxVector& f0_init, const TrialCompensation& omega,
                                                     const SweepPlan& plan, std::vector<LoggedSweep>* log,
                                                     std::size_t step, SweepRole first) {
  plan.validate(backend.loop_count(), backend.channel_count());
  if (omega.target_loop() != plan.loop) throw DimensionError("compensation targets a different loop than the sweep");
  const auto params = omega.free_params();
  PeriodicityMeasurement out;

  auto primary = run_sweep(backend, c_init, f0_init, omega, plan, plan.start);
  if (log) log->push_back({first, step, params, primary});
  try {
    out.fit = analyze_primary(primary);
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
    log::debug(std::string("period fit failed: ") + e.what());
    return out;
  }
  out.period = out.fit->tau * plan.delta;
  auto shifted = run_sweep(backend, c_init, f0_init, omega, plan, shifted_start(primary, *out.fit));
  if (log) log->push_back({SweepRole::shifted, step, params, shifted});
  try {
    out.score = score_periodicity(primary, shifted);
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
    out.score = -1.0;
  }
  return out;
}

SweepPlan plan_for_loop(Index loop, Index loops, std::size_t channel_count, const SweepSettings& settings,
                        double period) {
  SweepPlan plan;
  plan.loop = loop;
  plan.delta = settings.delta;
  plan.span = settings.span_periods * period;
  plan.fixed = choose_off_sweep_biases(loops, settings.hints);
  plan.start = 0.0;
  if (settings.channels.empty()) {
    for (std::size_t c = 0; c < channel_count; ++c) plan.channels.push_back(c);
  } else {
    plan.channels = settings.channels;
  }
  return plan;
}

std::uint64_t loop_seed(std::uint64_t seed, Index loop) {
  return seed * 1000003u + static_cast<std::uint64_t>(loop);
}

LoopRun calibrate_loop(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init, Index loop,
                       const OptimizerConfig& optimizer, const SweepSettings& sweep) {
  const Index n = backend.loop_count();
  if (c_init.size() != n || f0_init.size() != n) throw DimensionError("estimate does not match the device");
  if (static_cast<Index>(optimizer.bounds.size()) != n - 1) {
    throw DimensionError("optimizer needs one bound per compensation parameter");
  }
  SweepPlan plan = plan_for_loop(loop, n, backend.channel_count(), sweep, sweep.period_guess);
  plan.validate(n, backend.channel_count());
  bool refined = !sweep.refine_span;

  LoopRun run{{TrialCompensation(n, loop), 0.0, -1.0, {}}, {}, false, {}};
  std::size_t calls = 0;
  auto objective = [&](std::span<const double> x) {
    const TrialCompensation omega(n, loop, x);
    const auto m = measure_periodicity_objective(backend, c_init, f0_init, omega, plan, &run.sweeps, calls++);
    if (!m.failed && !refined) {
      refined = true;
      SweepPlan next = plan;
      next.span = sweep.span_periods * m.period;
      if (next.points() >= SweepPlan::kMinPoints) plan = next;
    }
    return m.failed ? -1.0 : m.score;
  };
  const Clock clock = [&] { return backend.measurement_count(); };

  OptimizeResult opt;
  try {
    opt = optimize(objective, optimizer, clock);
  } catch (const OptimizationAborted& e) {
    run.result.history = e.history;
    run.error = e.what();
    log::warn("loop " + std::to_string(loop) + ": " + run.error);
    return run;
  }
  run.result.history = opt.history;
  run.result.compensation = TrialCompensation(n, loop, opt.best);
  try {
    const auto m = measure_periodicity_objective(backend, c_init, f0_init, run.result.compensation, plan, &run.sweeps,
                                                 run.result.history.size(), SweepRole::final);
    if (m.failed) throw FitError(m.failure);
    run.result.period = m.period;
    run.result.score = m.score;
    run.complete = true;
  } catch (const std::exception& e) {
    run.error = std::string("period at the optimum: ") + e.what();
    log::warn("loop " + std::to_string(loop) + ": " + run.error);
  }
  return run;
}

CalibrationSession calibrate_all(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                                 const OptimizerConfig& optimizer, const SweepSettings& sweep) {
  CalibrationSession session;
  session.c_init = c_init;
  session.f0_init = f0_init;
  session.optimizer = optimizer;
  session.sweep = sweep;
  const Index n = backend.loop_count();
  bool ok = true;
  for (Index i = 0; i < n; ++i) {
    OptimizerConfig cfg = optimizer;
    cfg.seed = loop_seed(optimizer.seed, i);
    session.loops.push_back(calibrate_loop(backend, c_init, f0_init, i, cfg, sweep));
    ok = ok && session.loops.back().complete;
  }
  if (!ok) return session;
  std::vector<LoopCalibrationResult> results;
  for (const auto& r : session.loops) results.push_back(r.result);
  session.residual_estimate = assemble_residual_estimate(results);
  session.updated_estimate = update_estimate(c_init, *session.residual_estimate);
  session.complete = true;
  return session;
}

namespace {

LandscapePoint landscape_point(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                               const SweepPlan& plan, TrialCompensation omega, std::vector<LoggedSweep>* log,
                               std::size_t step) {
  LandscapePoint p;
  p.params = omega.free_params();
  try {
    const auto m = measure_periodicity_objective(backend, c_init, f0_init, omega, plan, log, step);
    p.score = m.score;
    p.failed = m.failed;
  } catch (const std::exception& e) {
    log::warn(std::string("landscape point failed: ") + e.what());
    p.failed = true;
  }
  return p;
}

}  // namespace

std::vector<LandscapePoint> scan_landscape_1d(DeviceBackend& backend, const CrosstalkMatrix& c_init,
                                              const FluxVector& f0_init, Index loop, Index j,
                                              const std::vector<double>& values, const SweepSettings& sweep,
                                              std::vector<LoggedSweep>* log) {
  const Index n = backend.loop_count();
  if (j == loop || j < 0 || j >= n) throw DimensionError("scan parameter must name another loop");
  const auto plan = plan_for_loop(loop, n, backend.channel_count(), sweep, sweep.period_guess);
  std::vector<LandscapePoint> out;
  for (double v : values) {
    TrialCompensation omega(n, loop);
    omega.set(j, v);
    out.push_back(landscape_point(backend, c_init, f0_init, plan, omega, log, out.size()));
  }
  return out;
}

Matrix scan_landscape_2d(DeviceBackend& backend, const CrosstalkMatrix& c_init, const FluxVector& f0_init, Index loop,
                         Index a, Index b, const std::vector<double>& a_values, const std::vector<double>& b_values,
                         const SweepSettings& sweep, std::vector<LoggedSweep>* log) {
  const Index n = backend.loop_count();
  if (a == loop || b == loop || a == b || a < 0 || b < 0 || a >= n || b >= n) {
    throw DimensionError("scan parameters must name two other distinct loops");
  }
  const auto plan = plan_for_loop(loop, n, backend.channel_count(), sweep, sweep.period_guess);
  Matrix out(static_cast<Index>(a_values.size()), static_cast<Index>(b_values.size()));
  for (std::size_t r = 0; r < a_values.size(); ++r) {
    for (std::size_t c = 0; c < b_values.size(); ++c) {
      TrialCompensation omega(n, loop);
      omega.set(a, a_values[r]);
      omega.set(b, b_values[c]);
      out(static_cast<Index>(r), static_cast<Index>(c)) =
          landscape_point(backend, c_init, f0_init, plan, omega, log, r * b_values.size() + c).score;
    }
  }
  return out;
}

}  // namespace fluxcal

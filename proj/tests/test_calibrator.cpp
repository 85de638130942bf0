#include "doctest.h"

#include <cmath>

#include "fluxcal/calibrator.hpp"
#include "fluxcal/errors.hpp"
#include "fluxcal/presets.hpp"
#include "support.hpp"

using namespace fluxcal;

namespace {

Matrix residual2() {
  Matrix m(2, 2);
  m << 1.0, 0.06, -0.04, 1.0;
  return m;
}

testing::AnalyticBackend analytic(const Matrix& c, std::size_t channels = 4) {
  return testing::AnalyticBackend(c, Vector::Zero(c.rows()), channels, testing::mixed_response);
}

SweepPlan plan2(Index loop) {
  SweepPlan p;
  p.loop = loop;
  p.fixed = {0.15, 0.15};
  p.channels = {0, 1, 2, 3};
  return p;
}

}  // namespace

TEST_CASE("off-sweep biases") {
  CHECK(choose_off_sweep_biases(3) == std::vector<double>{0.15, 0.15, 0.15});
  OffSweepHints h;
  h.symmetry_points = {0.4, 0.0, -0.1};
  h.overrides = {std::nullopt, 0.33};
  const auto b = choose_off_sweep_biases(3, h);
  CHECK(b[0] == doctest::Approx(0.55));
  CHECK(b[1] == 0.33);
  CHECK(b[2] == doctest::Approx(0.05));
}

TEST_CASE("sweep plan validation") {
  auto p = plan2(0);
  CHECK(p.points() == 110);
  CHECK_NOTHROW(p.validate(2, 4));
  p.span = 0.5;
  CHECK_THROWS_AS(p.validate(2, 4), DimensionError);
  p = plan2(0);
  p.channels = {9};
  CHECK_THROWS_AS(p.validate(2, 4), DimensionError);
  p = plan2(2);
  CHECK_THROWS_AS(p.validate(2, 4), DimensionError);
  p = plan2(0);
  p.fixed = {0.15};
  CHECK_THROWS_AS(p.validate(2, 4), DimensionError);
}

TEST_CASE("identity residual scores as periodic with unit period") {
  auto dev = analytic(Matrix::Identity(2, 2));
  std::vector<LoggedSweep> log;
  const auto m = measure_periodicity_objective(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2),
                                               TrialCompensation(2, 0), plan2(0), &log, 3);
  CHECK_FALSE(m.failed);
  CHECK(m.score >= 0.99);
  CHECK(m.period == doctest::Approx(1.0).epsilon(0.002));
  REQUIRE(log.size() == 2);
  CHECK(log[0].role == SweepRole::primary);
  CHECK(log[1].role == SweepRole::shifted);
  CHECK(log[1].step == 3);
  CHECK(log[1].record.start() == shifted_start(log[0].record, analyze_primary(log[0].record)));
  const auto again = measure_periodicity_objective(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2),
                                                   TrialCompensation(2, 0), plan2(0));
  CHECK(again.score == m.score);
}

TEST_CASE("the optimum compensation beats a wrong one") {
  auto dev = analytic(residual2());
  const CrosstalkMatrix res(residual2());
  const auto opt = optimum_compensation(res, 0);
  TrialCompensation wrong(2, 0);
  wrong.set(1, opt[1] + 0.15);
  const auto good = measure_periodicity_objective(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), opt, plan2(0));
  const auto bad = measure_periodicity_objective(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), wrong, plan2(0));
  CHECK(good.score >= 0.99);
  CHECK(good.period == doctest::Approx(res.inverse()(0, 0)).epsilon(2e-3));
  CHECK(bad.score < good.score - 0.1);
}

TEST_CASE("a flat readout yields the failure sentinel") {
  testing::AnalyticBackend dev(Matrix::Identity(2, 2), Vector::Zero(2), 4,
                               [](std::size_t, const Vector&) { return 1.0; });
  const auto m = measure_periodicity_objective(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2),
                                               TrialCompensation(2, 0), plan2(0));
  CHECK(m.failed);
  CHECK(m.score == -1.0);
  CHECK_FALSE(m.failure.empty());
}

TEST_CASE("calibrate_loop lands on the plateau around the optimum") {
  // P varies by ~1e-4 over +-0.02 of Omega here, so the argmax is only
  // resolved to about 1e-2.
  auto dev = analytic(residual2());
  const CrosstalkMatrix res(residual2());
  auto oc = OptimizerConfig::with_bounds(1, 0.2);
  oc.seed = 2;
  for (Index i = 0; i < 2; ++i) {
    const auto run = calibrate_loop(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), i, oc, {});
    REQUIRE(run.complete);
    const auto opt = optimum_compensation(res, i);
    CHECK(std::sqrt(compensation_distance(run.result.compensation, opt)) < 1.5e-2);
    const auto at_opt = measure_periodicity_objective(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), opt,
                                                      plan_for_loop(i, 2, 4, {}, 1.0));
    CHECK(run.result.score >= at_opt.score - 5e-5);
    CHECK(run.result.period == doctest::Approx(res.inverse()(i, i)).epsilon(3e-3));
    CHECK(run.result.history.size() == 80);
    // Steps tag sweeps with the evaluation they belong to; the final pair follows.
    CHECK(run.sweeps.front().step == 0);
    CHECK(run.sweeps.back().step == 80);
    CHECK(run.sweeps.back().role == SweepRole::shifted);
  }
}

TEST_CASE("budget of one evaluates a single point") {
  auto dev = analytic(residual2());
  auto oc = OptimizerConfig::with_bounds(1, 0.2);
  oc.n_total = 1;
  oc.n_init = 1;
  const auto run = calibrate_loop(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), 0, oc, {});
  REQUIRE(run.result.history.size() == 1);
  CHECK(run.result.compensation.free_params() == run.result.history[0].params);
}

TEST_CASE("a single loop only measures its period") {
  Matrix c(1, 1);
  c << 0.8;
  auto dev = analytic(c, 3);
  OptimizerConfig oc;
  const auto s = calibrate_all(dev, CrosstalkMatrix::identity(1), FluxVector::zero(1), oc);
  REQUIRE(s.complete);
  CHECK(s.loops[0].result.history.size() == 1);
  CHECK(s.loops[0].result.period == doctest::Approx(1.25).epsilon(2e-3));
  CHECK((*s.updated_estimate)(0, 0) == doctest::Approx(0.8).epsilon(2e-3));
}

TEST_CASE("starting from the truth leaves an identity residual") {
  Matrix c(3, 3);
  c << 1.0, 0.05, -0.08, 0.04, 0.95, 0.05, -0.09, 0.07, 1.05;
  auto dev = analytic(c);
  auto oc = OptimizerConfig::with_bounds(2, 0.2);
  oc.seed = 4;
  const auto s = calibrate_all(dev, CrosstalkMatrix(c), FluxVector::zero(3), oc);
  REQUIRE(s.complete);
  const Matrix dev_from_identity = s.residual_estimate->entries() - Matrix::Identity(3, 3);
  CHECK(dev_from_identity.cwiseAbs().maxCoeff() < 2e-2);
}

TEST_CASE("loop results do not depend on calibration order") {
  auto dev = analytic(residual2());
  auto oc = OptimizerConfig::with_bounds(1, 0.2);
  oc.n_total = 25;
  oc.seed = 9;
  const auto all = calibrate_all(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), oc);
  auto single = oc;
  single.seed = loop_seed(oc.seed, 1);
  const auto alone = calibrate_loop(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), 1, single, {});
  CHECK(alone.result.compensation.free_params() == all.loops[1].result.compensation.free_params());
  CHECK(alone.result.period == all.loops[1].result.period);
}

TEST_CASE("a backend failure leaves a partial session") {
  auto inner = analytic(residual2());
  testing::FailingBackend dev(inner, 2000);
  auto oc = OptimizerConfig::with_bounds(1, 0.2);
  const auto s = calibrate_all(dev, CrosstalkMatrix::identity(2), FluxVector::zero(2), oc);
  CHECK_FALSE(s.complete);
  CHECK_FALSE(s.residual_estimate);
  CHECK_FALSE(s.loops[0].complete);
  CHECK_FALSE(s.loops[0].error.empty());
  CHECK(s.loops[0].result.history.size() > 0);
  CHECK(s.loops[0].result.history.size() < 80);
}

TEST_CASE("landscape scans") {
  auto dev = analytic(residual2());
  const CrosstalkMatrix c(residual2());
  CHECK(scan_landscape_1d(dev, c, FluxVector::zero(2), 0, 1, {}).empty());
  CHECK_THROWS_AS(scan_landscape_1d(dev, c, FluxVector::zero(2), 0, 0, {0.0}), DimensionError);
  std::vector<LoggedSweep> log;
  const auto pts = scan_landscape_1d(dev, c, FluxVector::zero(2), 0, 1, {-0.1, -0.05, 0.0, 0.05, 0.1}, {}, &log);
  REQUIRE(pts.size() == 5);
  std::size_t best = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    CHECK(pts[k].score >= -1.0);
    CHECK(pts[k].score <= 1.0);
    if (pts[k].score > pts[best].score) best = k;
  }
  CHECK(best == 2);
  CHECK(log.size() == 10);
  CHECK(log.back().step == 4);
}

TEST_CASE("2D landscape on the 3-loop preset") {
  SimDevice dev(load_preset("paper-3loop"));
  const auto& cfg = dev.config();
  SweepSettings sw;
  sw.hints.symmetry_points = cfg.symmetry_points;
  const auto one = scan_landscape_2d(dev, cfg.crosstalk, cfg.offsets, 2, 0, 1, {0.0}, {0.0}, sw);
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) >= 0.99);
  CHECK_THROWS_AS(scan_landscape_2d(dev, cfg.crosstalk, cfg.offsets, 2, 0, 0, {0.0}, {0.0}, sw), DimensionError);
}

namespace {

// Largest |dR/df_j| over channels, at the biases and over one period of the
// swept loop, against the same over every f_j.
struct Sensitivity {
  double at_bias = 0.0;
  double best = 0.0;
};

Sensitivity bias_sensitivity(SimDevice& dev, const std::vector<double>& bias, Index i, Index j) {
  auto slope = [&](FluxVector f) {
    const double h = 1e-4;
    f[j] += h;
    dev.set_true_fluxes(f);
    const auto up = dev.measure_all();
    f[j] -= 2 * h;
    dev.set_true_fluxes(f);
    const auto down = dev.measure_all();
    double s = 0.0;
    for (std::size_t c = 0; c < up.size(); ++c) s = std::max(s, std::abs(up[c] - down[c]) / (2 * h));
    return s;
  };
  Sensitivity out;
  for (int a = 0; a < 50; ++a) {
    FluxVector f = FluxVector::zero(static_cast<Index>(bias.size()));
    for (Index k = 0; k < f.size(); ++k) f[k] = bias[static_cast<std::size_t>(k)];
    f[i] = 0.02 * a;
    out.at_bias = std::max(out.at_bias, slope(f));
    for (int b = 0; b < 50; ++b) {
      FluxVector g = f;
      g[j] = 0.02 * b;
      out.best = std::max(out.best, slope(g));
    }
  }
  return out;
}

std::vector<double> preset_biases(const DeviceConfig& cfg) {
  OffSweepHints hints;
  hints.symmetry_points = cfg.symmetry_points;
  return choose_off_sweep_biases(cfg.loop_count(), hints);
}

}  // namespace

TEST_CASE("off-sweep biases are flux-sensitive while a QFP loop is swept") {
  SimDevice dev(load_preset("paper-3loop"));
  const auto bias = preset_biases(dev.config());
  for (Index i : {0, 1}) {
    for (Index j = 0; j < 3; ++j) {
      if (j == i) continue;
      const auto s = bias_sensitivity(dev, bias, i, j);
      CHECK_MESSAGE(s.at_bias > 0.1 * s.best, "swept loop " << i << ", biased loop " << j);
    }
  }
}

// Known shortfall: with TR swept the QFP sits on its polarization plateau.
TEST_CASE("off-sweep biases are flux-sensitive while the TR loop is swept" * doctest::should_fail()) {
  SimDevice dev(load_preset("paper-3loop"));
  const auto bias = preset_biases(dev.config());
  for (Index j : {0, 1}) {
    const auto s = bias_sensitivity(dev, bias, 2, j);
    CHECK_MESSAGE(s.at_bias > 0.1 * s.best, "biased loop " << j);
  }
}

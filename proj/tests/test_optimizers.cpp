#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "fluxcal/errors.hpp"
#include "fluxcal/optimizers.hpp"

using namespace fluxcal;

namespace {

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double big_phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double sq_exp(double a, double b, double sf, double l) { return sf * sf * std::exp(-(a - b) * (a - b) / (2 * l * l)); }

}  // namespace

TEST_CASE("expected improvement closed form") {
  for (double mean : {-0.3, 0.0, 0.2, 0.9}) {
    for (double sd : {0.01, 0.1, 0.5}) {
      const double best = 0.1;
      const double z = (mean - best) / sd;
      CHECK(expected_improvement(mean, sd * sd, best) ==
            doctest::Approx((mean - best) * big_phi(z) + sd * phi(z)).epsilon(1e-12));
    }
  }
  CHECK(expected_improvement(0.5, 0.0, 0.2) == doctest::Approx(0.3));
  CHECK(expected_improvement(0.1, 0.0, 0.2) == 0.0);
}

TEST_CASE("GP posterior for two training points matches the 2x2 solve") {
  const double l = 0.3;
  const double sf = 0.5;
  const double sn = 0.01;
  GpModel gp(1, {l, sf, sn});
  gp.fit({{0.0}, {0.4}}, {0.2, 0.8});
  CHECK(gp.prior_mean() == doctest::Approx(0.5));
  CHECK(gp.best_target() == 0.8);
  const double k00 = sf * sf + sn * sn;
  const double k01 = sq_exp(0.0, 0.4, sf, l);
  const double det = k00 * k00 - k01 * k01;
  for (double x : {-0.1, 0.1, 0.25, 0.6}) {
    const double a = sq_exp(x, 0.0, sf, l);
    const double b = sq_exp(x, 0.4, sf, l);
    // K^-1 = [[k00, -k01], [-k01, k00]] / det
    const double w0 = (k00 * a - k01 * b) / det;
    const double w1 = (-k01 * a + k00 * b) / det;
    const double mean = 0.5 + w0 * (0.2 - 0.5) + w1 * (0.8 - 0.5);
    const double var = sf * sf - (a * w0 + b * w1);
    const double q[] = {x};
    const auto p = gp_posterior(gp, q);
    CHECK(p.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(var).epsilon(1e-10));
  }
}

TEST_CASE("serial and parallel posterior and EI agree bit for bit") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int k = 0; k < 30; ++k) {
    xs.push_back({u(rng), u(rng)});
    ys.push_back(std::cos(10 * xs.back()[0]) * std::sin(7 * xs.back()[1]));
  }
  GpModel gp(2, {0.05, 0.5, 0.01});
  gp.fit(xs, ys);
  std::vector<double> q(2 * 500);
  for (auto& v : q) v = u(rng);
  std::vector<double> m1(500), v1(500), m2(500), v2(500), e1(500), e2(500);
  kernels::gp_posterior_serial(gp.inputs(), q, m1, v1);
  kernels::gp_posterior_parallel(gp.inputs(), q, m2, v2);
  kernels::expected_improvement_serial(m1, v1, 0.3, e1);
  kernels::expected_improvement_parallel(m2, v2, 0.3, e2);
  CHECK(m1 == m2);
  CHECK(v1 == v2);
  CHECK(e1 == e2);
}

TEST_CASE("proposals stay inside the bounds and are reproducible") {
  GpModel gp(2, {});
  gp.fit({{0.0, 0.0}, {0.1, -0.1}}, {0.5, 0.7});
  EvaluationHistory h;
  h.append({0, {0.0, 0.0}, 0.5, 0});
  h.append({1, {0.1, -0.1}, 0.7, 1});
  const std::vector<Bounds> bounds{{-0.2, 0.2}, {0.0, 0.05}};
  for (double local : {0.0, 0.5}) {
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    const auto x = propose_next(gp, h, bounds, a, 256, kernels::Exec::serial, local);
    const auto y = propose_next(gp, h, bounds, b, 256, kernels::Exec::parallel, local);
    CHECK(x == y);
    CHECK(x[0] >= -0.2);
    CHECK(x[0] <= 0.2);
    CHECK(x[1] >= 0.0);
    CHECK(x[1] <= 0.05);
  }
}

TEST_CASE("Bayesian optimization finds the peak of a smooth bump") {
  const std::vector<double> opt{0.05, -0.03};
  auto f = [&](std::span<const double> x) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < 2; ++k) d2 += (x[k] - opt[k]) * (x[k] - opt[k]);
    return std::exp(-d2 / (2 * 0.05 * 0.05));
  };
  auto cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.gp.length_scale = 0.05;
  cfg.seed = 3;
  const auto r = optimize(f, cfg);
  CHECK(r.history.size() == 80);
  CHECK(std::hypot(r.best[0] - opt[0], r.best[1] - opt[1]) < 0.01);
  CHECK(r.best_value == r.history[*r.history.best_index()].value);
}

TEST_CASE("budget of one returns the single evaluated point") {
  auto cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.n_total = 1;
  cfg.n_init = 1;
  int calls = 0;
  const auto r = optimize([&](std::span<const double> x) { ++calls; return x[0]; }, cfg);
  CHECK(calls == 1);
  CHECK(r.history.size() == 1);
  CHECK(r.best == r.history[0].params);
}

TEST_CASE("no parameters means one evaluation") {
  OptimizerConfig cfg;
  int calls = 0;
  const auto r = optimize([&](std::span<const double> x) { ++calls; CHECK(x.empty()); return 0.4; }, cfg);
  CHECK(calls == 1);
  CHECK(r.best.empty());
  CHECK(r.best_value == 0.4);
}

TEST_CASE("SPSA ascends a quadratic") {
  const std::vector<double> opt{0.05, -0.03};
  auto f = [&](std::span<const double> x) {
    return -50.0 * ((x[0] - opt[0]) * (x[0] - opt[0]) + (x[1] - opt[1]) * (x[1] - opt[1]));
  };
  auto cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.algorithm = Algorithm::spsa;
  cfg.n_total = 200;
  cfg.seed = 1;
  const auto r = optimize(f, cfg);
  CHECK(r.history.size() == 200);
  CHECK(std::hypot(r.best[0] - opt[0], r.best[1] - opt[1]) < 5e-3);
}

TEST_CASE("SPSA step by hand") {
  // a_0 = a / (1 + A)^alpha, c_0 = c; f(x) = x gives gradient estimate 1.
  SpsaState s{{0.0}, 0, {}};
  std::mt19937_64 rng(0);
  const std::vector<Bounds> b{{-1.0, 1.0}};
  EvaluationHistory h;
  const auto next = spsa_step(s, [](std::span<const double> x) { return x[0]; }, b, rng, &h);
  CHECK(h.size() == 2);
  CHECK(std::abs(h[0].params[0]) == doctest::Approx(0.02));
  CHECK(h[1].params[0] == doctest::Approx(-h[0].params[0]));
  CHECK(next.iterate[0] == doctest::Approx(0.05 / std::pow(11.0, 0.602)));
  CHECK(next.k == 1);
}

TEST_CASE("odd SPSA budget spends the last call on the final iterate") {
  auto cfg = OptimizerConfig::with_bounds(1, 0.2);
  cfg.algorithm = Algorithm::spsa;
  cfg.n_total = 5;
  cfg.n_init = 0;
  const auto r = optimize([](std::span<const double> x) { return -x[0] * x[0]; }, cfg);
  CHECK(r.history.size() == 5);
  CHECK(r.history[4].params == r.best);
}

TEST_CASE("identical seeds give identical histories") {
  auto f = [](std::span<const double> x) { return std::sin(20 * x[0]) + std::cos(15 * x[1]); };
  auto cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.n_total = 30;
  cfg.seed = 77;
  const auto a = optimize(f, cfg);
  const auto b = optimize(f, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].params == b.history[k].params);
    CHECK(a.history[k].value == b.history[k].value);
  }
}

TEST_CASE("objective failure aborts with the partial history") {
  auto cfg = OptimizerConfig::with_bounds(2, 0.2);
  int calls = 0;
  auto f = [&](std::span<const double>) -> double {
    if (++calls == 5) throw std::runtime_error("instrument offline");
    return 0.0;
  };
  try {
    optimize(f, cfg);
    FAIL("expected an abort");
  } catch (const OptimizationAborted& e) {
    CHECK(e.history.size() == 4);
  }
}

TEST_CASE("configuration errors") {
  auto cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.n_init = 100;
  CHECK_THROWS_AS(cfg.validate(), DimensionError);
  cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.bounds[1] = {0.1, 0.1};
  CHECK_THROWS_AS(cfg.validate(), DimensionError);
  cfg = OptimizerConfig::with_bounds(2, 0.2);
  cfg.gp.length_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DimensionError);
  CHECK_THROWS_AS(algorithm_from_string("lbfgs"), DimensionError);
  CHECK(algorithm_from_string("spsa") == Algorithm::spsa);
}

TEST_CASE("history tracks the first best and prefix maxima") {
  EvaluationHistory h;
  h.append({0, {}, 0.2, 0});
  h.append({1, {}, 0.5, 1});
  h.append({2, {}, 0.5, 2});
  h.append({3, {}, 0.1, 3});
  CHECK(*h.best_index() == 1);
  CHECK(h.best_so_far(1) == 0.2);
  CHECK(h.best_so_far(10) == 0.5);
}

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"

#include "fluxcal/kernels.hpp"
#include "fluxcal/optimizers.hpp"

using namespace fluxcal;

namespace {

// Best of `reps` wall-clock runs, in milliseconds.
template <class F>
double time_ms(int reps, F&& f) {
  double best = INFINITY;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool report(const std::string& name, double serial, double parallel, bool equal) {
  std::printf("%-34s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  %s\n", name.c_str(), serial, parallel,
              serial / parallel, equal ? "identical" : "MISMATCH");
  return equal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP kernels"};
  int reps = 5;
  bool quick = false;
  app.add_option("--reps", reps, "Timed repetitions per kernel (best is reported)");
  app.add_flag("--quick", quick, "Small sizes, for a smoke test");
  CLI11_PARSE(app, argc, argv);
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());

  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  bool ok = true;

  const std::vector<std::pair<std::size_t, std::size_t>> records =
      quick ? std::vector<std::pair<std::size_t, std::size_t>>{{6, 110}}
            : std::vector<std::pair<std::size_t, std::size_t>>{{6, 110}, {12, 440}, {32, 2000}};
  for (const auto& [channels, points] : records) {
    std::vector<double> data(channels * points);
    for (auto& v : data) v = gauss(rng);
    const std::size_t lags = points - 4;
    std::vector<double> a(lags);
    std::vector<double> b(lags);
    const double ts = time_ms(reps, [&] { kernels::correlation_curve_serial(data, channels, points, 1, a); });
    const double tp = time_ms(reps, [&] { kernels::correlation_curve_parallel(data, channels, points, 1, b); });
    ok = report("correlation_curve " + std::to_string(channels) + "x" + std::to_string(points), ts, tp, a == b) && ok;
  }

  const std::vector<std::pair<std::size_t, std::size_t>> gps =
      quick ? std::vector<std::pair<std::size_t, std::size_t>>{{20, 256}}
            : std::vector<std::pair<std::size_t, std::size_t>>{{20, 2048}, {80, 2048}, {150, 8192}};
  for (const auto& [train, queries] : gps) {
    const std::size_t dim = 4;
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    std::vector<std::vector<double>> xs(train, std::vector<double>(dim));
    std::vector<double> ys;
    for (auto& x : xs) {
      for (auto& v : x) v = u(rng);
      ys.push_back(std::cos(8 * x[0]) * std::sin(6 * x[1]) + x[2] - x[3]);
    }
    GpModel gp(dim, {});
    gp.fit(xs, ys);
    std::vector<double> q(queries * dim);
    for (auto& v : q) v = u(rng);
    std::vector<double> m1(queries), v1(queries), m2(queries), v2(queries), e1(queries), e2(queries);
    const auto in = gp.inputs();
    const double ps = time_ms(reps, [&] { kernels::gp_posterior_serial(in, q, m1, v1); });
    const double pp = time_ms(reps, [&] { kernels::gp_posterior_parallel(in, q, m2, v2); });
    const std::string tag = std::to_string(train) + " train, " + std::to_string(queries) + " queries";
    ok = report("gp_posterior " + tag, ps, pp, m1 == m2 && v1 == v2) && ok;
    const double es = time_ms(reps, [&] { kernels::expected_improvement_serial(m1, v1, gp.best_target(), e1); });
    const double ep = time_ms(reps, [&] { kernels::expected_improvement_parallel(m2, v2, gp.best_target(), e2); });
    ok = report("expected_improvement " + std::to_string(queries), es, ep, e1 == e2) && ok;
  }
  return ok ? 0 : 1;
}

#pragma once

// Data-parallel inner loops. Every `*_parallel` kernel has a `*_serial`
// reference twin; the pair must agree bit-for-bit because each output
// element is reduced in a fixed order by exactly one thread.

#include <cstddef>
#include <span>

namespace fluxcal::kernels {

enum class Exec { serial, parallel };

// Pooled Pearson correlation between each channel and its `lag`-step
// translation over the overlap {0 .. points-lag-1}, with per-channel means
// taken over that overlap. `data` is channel-major (channels x points).
// Returns NaN when the pooled variance vanishes.
double lag_correlation(std::span<const double> data, std::size_t channels, std::size_t points,
                       std::size_t lag);

// out[k] = lag_correlation(..., first_lag + k)
void correlation_curve_serial(std::span<const double> data, std::size_t channels, std::size_t points,
                              std::size_t first_lag, std::span<double> out);
void correlation_curve_parallel(std::span<const double> data, std::size_t channels, std::size_t points,
                                std::size_t first_lag, std::span<double> out);

// Pooled Pearson correlation between two aligned channel-major records,
// per-channel means over the full index set. NaN on zero variance.
double pooled_correlation(std::span<const double> a, std::span<const double> b, std::size_t channels,
                          std::size_t points);

// Squared-exponential GP posterior at `queries` (row-major, count x dim).
// `train` is row-major (n x dim); `alpha` = K^-1 (y - prior_mean);
// `chol` is the lower Cholesky factor of K (column-major n x n).
struct GpPosteriorInputs {
  std::span<const double> train;
  std::size_t train_count = 0;
  std::size_t dim = 0;
  std::span<const double> alpha;
  std::span<const double> chol;
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double prior_mean = 0.0;
};

void gp_posterior_serial(const GpPosteriorInputs& gp, std::span<const double> queries, std::span<double> mean,
                         std::span<double> variance);
void gp_posterior_parallel(const GpPosteriorInputs& gp, std::span<const double> queries,
                           std::span<double> mean, std::span<double> variance);

double expected_improvement(double mean, double variance, double best);

void expected_improvement_serial(std::span<const double> mean, std::span<const double> variance, double best,
                                 std::span<double> out);
void expected_improvement_parallel(std::span<const double> mean, std::span<const double> variance,
                                   double best, std::span<double> out);

}  // namespace fluxcal::kernels

#include "fluxcal/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace fluxcal::kernels {

double lag_correlation(std::span<const double> data, std::size_t channels, std::size_t points,
                       std::size_t lag) {
  const std::size_t overlap = points - lag;
  double num = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t l = 0; l < channels; ++l) {
    const double* a = data.data() + l * points;
    const double* b = a + lag;
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t s = 0; s < overlap; ++s) {
      ma += a[s];
      mb += b[s];
    }
    ma /= static_cast<double>(overlap);
    mb /= static_cast<double>(overlap);
    for (std::size_t s = 0; s < overlap; ++s) {
      const double da = a[s] - ma;
      const double db = b[s] - mb;
      num += da * db;
      saa += da * da;
      sbb += db * db;
    }
  }
  const double den = std::sqrt(saa * sbb);
  if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

void correlation_curve_serial(std::span<const double> data, std::size_t channels, std::size_t points,
                              std::size_t first_lag, std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = lag_correlation(data, channels, points, first_lag + k);
}

void correlation_curve_parallel(std::span<const double> data, std::size_t channels, std::size_t points,
                                std::size_t first_lag, std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    out[static_cast<std::size_t>(k)] =
        lag_correlation(data, channels, points, first_lag + static_cast<std::size_t>(k));
  }
}

double pooled_correlation(std::span<const double> a, std::span<const double> b, std::size_t channels,
                          std::size_t points) {
  double num = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t l = 0; l < channels; ++l) {
    const double* x = a.data() + l * points;
    const double* y = b.data() + l * points;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t s = 0; s < points; ++s) {
      mx += x[s];
      my += y[s];
    }
    mx /= static_cast<double>(points);
    my /= static_cast<double>(points);
    for (std::size_t s = 0; s < points; ++s) {
      const double dx = x[s] - mx;
      const double dy = y[s] - my;
      num += dx * dy;
      saa += dx * dx;
      sbb += dy * dy;
    }
  }
  const double den = std::sqrt(saa * sbb);
  if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

namespace {

void gp_posterior_one(const GpPosteriorInputs& gp, const double* query, double& mean, double& variance,
                      std::vector<double>& work) {
  const std::size_t n = gp.train_count;
  const double inv_two_l2 = 1.0 / (2.0 * gp.length_scale * gp.length_scale);
  work.resize(n);
  double mu = gp.prior_mean;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = gp.train.data() + i * gp.dim;
    double d2 = 0.0;
    for (std::size_t d = 0; d < gp.dim; ++d) {
      const double diff = x[d] - query[d];
      d2 += diff * diff;
    }
    work[i] = gp.signal_variance * std::exp(-d2 * inv_two_l2);
    mu += work[i] * gp.alpha[i];
  }
  // Forward substitution L v = k*, column-major L.
  double vv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = work[i];
    for (std::size_t j = 0; j < i; ++j) s -= gp.chol[j * n + i] * work[j];
    work[i] = s / gp.chol[i * n + i];
    vv += work[i] * work[i];
  }
  mean = mu;
  variance = std::max(0.0, gp.signal_variance - vv);
}

}  // namespace

void gp_posterior_serial(const GpPosteriorInputs& gp, std::span<const double> queries, std::span<double> mean,
                         std::span<double> variance) {
  std::vector<double> work;
  for (std::size_t q = 0; q < mean.size(); ++q) {
    gp_posterior_one(gp, queries.data() + q * gp.dim, mean[q], variance[q], work);
  }
}

void gp_posterior_parallel(const GpPosteriorInputs& gp, std::span<const double> queries,
                           std::span<double> mean, std::span<double> variance) {
  const auto count = static_cast<std::ptrdiff_t>(mean.size());
#pragma omp parallel
  {
    std::vector<double> work;
#pragma omp for schedule(static)
    for (std::ptrdiff_t q = 0; q < count; ++q) {
      const auto k = static_cast<std::size_t>(q);
      gp_posterior_one(gp, queries.data() + k * gp.dim, mean[k], variance[k], work);
    }
  }
}

double expected_improvement(double mean, double variance, double best) {
  const double gain = mean - best;
  const double sigma = std::sqrt(std::max(0.0, variance));
  if (!(sigma > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gain * cdf + sigma * pdf);
}

void expected_improvement_serial(std::span<const double> mean, std::span<const double> variance, double best,
                                 std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = expected_improvement(mean[k], variance[k], best);
}

void expected_improvement_parallel(std::span<const double> mean, std::span<const double> variance,
                                   double best, std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out[i] = expected_improvement(mean[i], variance[i], best);
  }
}

}  // namespace fluxcal::kernels

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "fluxcal/device.hpp"
#include "fluxcal/errors.hpp"
#include "fluxcal/types.hpp"

namespace testing {

using fluxcal::Index;
using fluxcal::Matrix;
using fluxcal::Vector;

// I + off-diagonal entries in [-scale, scale]; retried until cond < max_cond.
inline Matrix random_crosstalk(Index n, std::mt19937_64& rng, double scale = 0.2, double max_cond = 100.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::uniform_real_distribution<double> d(0.8, 1.25);
  while (true) {
    Matrix m(n, n);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) m(r, c) = r == c ? d(rng) : u(rng);
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s(0) / s(n - 1) < max_cond) return m;
  }
}

// Readout is a fixed function of the true fluxes f = C V + f0. Every channel
// is 1-periodic in every flux, so the crosstalk is the only structure.
class AnalyticBackend final : public fluxcal::DeviceBackend {
 public:
  using Response = std::function<double(std::size_t channel, const Vector& f)>;

  AnalyticBackend(Matrix c, Vector f0, std::size_t channels, Response response)
      : c_(std::move(c)), f0_(std::move(f0)), channels_(channels), response_(std::move(response)),
        v_(Vector::Zero(c_.rows())) {}

  Index loop_count() const override { return c_.rows(); }
  std::size_t channel_count() const override { return channels_; }
  void set_voltages(const fluxcal::VoltageVector& v) override { v_ = v.values(); }
  std::vector<double> measure(std::span<const std::size_t> channels) override {
    ++count_;
    const Vector f = c_ * v_ + f0_;
    std::vector<double> out;
    for (auto ch : channels) {
      if (ch >= channels_) throw fluxcal::DeviceError("no such channel");
      out.push_back(response_(ch, f));
    }
    return out;
  }
  std::uint64_t measurement_count() const override { return count_; }

  const Matrix& crosstalk() const { return c_; }
  const Vector& offsets() const { return f0_; }

 private:
  Matrix c_;
  Vector f0_;
  std::size_t channels_;
  Response response_;
  Vector v_;
  std::uint64_t count_ = 0;
};

// Channel l mixes all loops with different weights and harmonics.
inline double mixed_response(std::size_t l, const Vector& f) {
  constexpr double tau = 2.0 * std::numbers::pi;
  double y = 0.0;
  for (Index k = 0; k < f.size(); ++k) {
    const double w = 1.0 / (1.0 + static_cast<double>((l + static_cast<std::size_t>(k)) % 3));
    y += w * std::cos(tau * f[k] + 0.7 * static_cast<double>(l)) +
         0.3 * w * std::sin(2.0 * tau * f[k] + 0.4 * static_cast<double>(k));
  }
  return y;
}

// Direct transcription of the pooled lag correlation: each channel is
// standardized over the whole record, then channel-wise centred over the
// overlap and pooled.
inline double brute_lag_correlation(const std::vector<std::vector<double>>& ch, std::size_t t) {
  const std::size_t m = ch[0].size();
  long double num = 0;
  long double saa = 0;
  long double sbb = 0;
  for (const auto& raw : ch) {
    long double mean = 0;
    for (double v : raw) mean += v;
    mean /= m;
    long double ss = 0;
    for (double v : raw) ss += (v - mean) * (v - mean);
    std::vector<long double> x;
    for (double v : raw) x.push_back((v - mean) / std::sqrt(ss));
    long double ma = 0;
    long double mb = 0;
    for (std::size_t s = 0; s + t < m; ++s) {
      ma += x[s];
      mb += x[s + t];
    }
    ma /= (m - t);
    mb /= (m - t);
    for (std::size_t s = 0; s + t < m; ++s) {
      num += (x[s] - ma) * (x[s + t] - mb);
      saa += (x[s] - ma) * (x[s] - ma);
      sbb += (x[s + t] - mb) * (x[s + t] - mb);
    }
  }
  return static_cast<double>(num / std::sqrt(saa * sbb));
}

// Forwards to `inner` and throws DeviceError from measurement `fail_at` on.
class FailingBackend final : public fluxcal::DeviceBackend {
 public:
  FailingBackend(fluxcal::DeviceBackend& inner, std::uint64_t fail_at) : inner_(inner), fail_at_(fail_at) {}

  Index loop_count() const override { return inner_.loop_count(); }
  std::size_t channel_count() const override { return inner_.channel_count(); }
  void set_voltages(const fluxcal::VoltageVector& v) override { inner_.set_voltages(v); }
  std::vector<double> measure(std::span<const std::size_t> channels) override {
    if (inner_.measurement_count() >= fail_at_) throw fluxcal::DeviceError("instrument offline");
    return inner_.measure(channels);
  }
  std::uint64_t measurement_count() const override { return inner_.measurement_count(); }

 private:
  fluxcal::DeviceBackend& inner_;
  std::uint64_t fail_at_;
};

}  // namespace testing

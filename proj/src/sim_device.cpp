#include "fluxcal/sim_device.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "fluxcal/errors.hpp"

namespace fluxcal {

namespace {

bool is_element_z(LoopKind k) { return k == LoopKind::qfp_z || k == LoopKind::qubit_z; }
bool is_element_x(LoopKind k) { return k == LoopKind::qfp_x || k == LoopKind::qubit_x; }

}  // namespace

std::size_t DeviceConfig::channel_count() const {
  std::size_t n = 0;
  for (const auto& r : resonators) n += r.probes.size();
  return n;
}

void DeviceConfig::validate() const {
  const Index n = loop_count();
  if (n == 0) throw DimensionError("device has no loops");
  if (crosstalk.size() != n) throw DimensionError("crosstalk matrix does not match loop count");
  if (offsets.size() != n) throw DimensionError("flux offsets do not match loop count");
  if (coupling.rows() != n || coupling.cols() != n) throw DimensionError("coupling matrix does not match loop count");
  if (!(noise_sigma >= 0.0)) throw DimensionError("noise sigma must be non-negative");
  for (Index k = 0; k < n; ++k) {
    const auto& loop = loops[static_cast<std::size_t>(k)];
    if (coupling(k, k) != 0.0) throw DimensionError("loop " + loop.name + " couples to itself");
    if (is_element_z(loop.kind) || is_element_x(loop.kind)) {
      if (!loop.partner || *loop.partner < 0 || *loop.partner >= n) {
        throw DimensionError("element loop " + loop.name + " needs a partner loop");
      }
      const auto& other = loops[static_cast<std::size_t>(*loop.partner)];
      const bool paired = (is_element_z(loop.kind) && is_element_x(other.kind)) ||
                          (is_element_x(loop.kind) && is_element_z(other.kind));
      if (!paired || other.partner != k) throw DimensionError("loop " + loop.name + " has an inconsistent partner");
    }
    if (is_element_z(loop.kind)) {
      const auto& p = loop.element;
      if (!(p.delta_max > 0.0)) throw DimensionError("delta_max must be positive for " + loop.name);
      if (!(p.delta_latch < p.delta_max)) throw DimensionError("delta_latch must be below delta_max for " + loop.name);
    }
  }
  for (const auto& r : resonators) {
    if (!(r.linewidth > 0.0)) throw DimensionError("resonator " + r.name + " needs a positive linewidth");
    if (!(r.coupling > 0.0 && r.coupling <= r.linewidth)) {
      throw DimensionError("resonator " + r.name + " needs 0 < coupling <= linewidth");
    }
    if (r.flux_loop && (*r.flux_loop < 0 || *r.flux_loop >= n)) {
      throw DimensionError("resonator " + r.name + " references an unknown loop");
    }
    for (const auto& pull : r.pulls) {
      if (pull.element < 0 || pull.element >= n || !is_element_z(loops[static_cast<std::size_t>(pull.element)].kind)) {
        throw DimensionError("resonator " + r.name + " pulls from a loop that is not an element");
      }
    }
  }
  if (!symmetry_points.empty() && static_cast<Index>(symmetry_points.size()) != n) {
    throw DimensionError("symmetry points do not match loop count");
  }
  if (channel_count() == 0) throw DimensionError("device has no readout channels");
  for (const auto& t : tracking) {
    if (t.loop < 0 || t.loop >= n || t.channel >= channel_count() || static_cast<Index>(t.bias.size()) != n) {
      throw DimensionError("invalid tracking feature");
    }
  }
}

double qfp_symmetry_point(double f_x) { return 0.5 - 0.5 * f_x; }

double qfp_tunneling(double f_x, const QfpParams& params) {
  return params.delta_max * std::abs(std::cos(std::numbers::pi * f_x));
}

double qfp_bias(double f_z, double f_x, const QfpParams& params) {
  const double phase = 2.0 * std::numbers::pi * (f_z - qfp_symmetry_point(f_x));
  return params.persistent_current * std::sin(phase) / (2.0 * std::numbers::pi);
}

double two_level_polarization(double bias, double tunneling) {
  const double half = 0.5 * tunneling;
  const double norm = std::hypot(bias, half);
  if (norm == 0.0) return 0.0;
  return bias / norm;
}

QfpState qfp_ground_state(double f_z, double f_x, const QfpParams& params, int latch) {
  const double eps = qfp_bias(f_z, f_x, params);
  const double delta = qfp_tunneling(f_x, params);
  QfpState state{two_level_polarization(eps, delta), latch};
  if (params.hysteresis && delta < params.delta_latch && latch != 0) {
    state.polarization = latch * std::abs(state.polarization);
  } else if (eps != 0.0) {
    state.latch = eps > 0.0 ? 1 : -1;
  }
  return state;
}

double element_load(double polarization, double f_x) {
  return polarization * std::cos(std::numbers::pi * f_x);
}

double squid_load(double f_eff, double squid_current) {
  return squid_current * std::sin(2.0 * std::numbers::pi * f_eff);
}

Vector effective_fluxes(const Vector& fluxes, const Matrix& coupling, const Vector& loads) {
  return fluxes + coupling * loads;
}

double resonator_frequency(const ResonatorParams& r, double f_eff, double pull) {
  return r.base_frequency + r.modulation * std::cos(2.0 * std::numbers::pi * f_eff) + pull;
}

double transmission(double probe, double resonance, double linewidth, double coupling) {
  const std::complex<double> den(0.5 * linewidth, probe - resonance);
  return std::abs(1.0 - 0.5 * coupling / den);
}

double resonator_response(double f_eff, double probe, const ResonatorParams& r) {
  return transmission(probe, resonator_frequency(r, f_eff, 0.0), r.linewidth, r.coupling);
}

TildeFluxes to_tilde(double f_z, double f_x) { return {f_z + 0.5 * f_x, f_x}; }
TildeFluxes from_tilde(double tilde_z, double tilde_x) { return {tilde_z - 0.5 * tilde_x, tilde_x}; }

SimDevice::SimDevice(DeviceConfig config) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t r = 0; r < config_.resonators.size(); ++r) {
    for (double p : config_.resonators[r].probes) channels_.push_back({r, p});
  }
  channel_count_ = channels_.size();
  const Index n = config_.loop_count();
  voltages_ = VoltageVector::zero(n);
  loads_ = Vector::Zero(n);
  effective_ = Vector::Zero(n);
  reset();
}

void SimDevice::reset() {
  const Index n = config_.loop_count();
  drift_ = Vector::Zero(n);
  latches_.assign(static_cast<std::size_t>(n), 0);
  rng_.seed(config_.seed);
}

void SimDevice::set_voltages(const VoltageVector& v) {
  if (v.size() != config_.loop_count()) throw DimensionError("voltage vector does not match loop count");
  voltages_ = v;
}

FluxVector SimDevice::true_fluxes() const {
  return FluxVector(config_.crosstalk.entries() * voltages_.values() + config_.offsets.values() + drift_);
}

void SimDevice::set_true_fluxes(const FluxVector& f) {
  if (f.size() != config_.loop_count()) throw DimensionError("flux vector does not match loop count");
  const Vector rhs = f.values() - config_.offsets.values() - drift_;
  voltages_ = VoltageVector(config_.crosstalk.entries().partialPivLu().solve(rhs));
}

void SimDevice::update_elements(const Vector& fluxes) {
  const Index n = config_.loop_count();
  std::vector<int> latches = latches_;
  loads_.setZero();
  // Loads feed back into each other's fluxes; iterate to the self-consistent
  // point, starting from zero so the result depends only on the fluxes (and
  // the latches when hysteresis is on).
  for (int iter = 0; iter < 200; ++iter) {
    double change = 0.0;
    for (Index k = 0; k < n; ++k) {
      const auto& loop = config_.loops[static_cast<std::size_t>(k)];
      double load = 0.0;
      if (is_element_z(loop.kind)) {
        const Index x = *loop.partner;
        const double f_z = fluxes[k] + config_.coupling.row(k).dot(loads_);
        const double f_x = fluxes[x] + config_.coupling.row(x).dot(loads_);
        const QfpState state = qfp_ground_state(f_z, f_x, loop.element, latches_[static_cast<std::size_t>(k)]);
        latches[static_cast<std::size_t>(k)] = state.latch;
        load = element_load(state.polarization, f_x);
      } else if (loop.kind == LoopKind::resonator && loop.squid_current != 0.0) {
        load = squid_load(fluxes[k] + config_.coupling.row(k).dot(loads_), loop.squid_current);
      } else {
        continue;
      }
      change = std::max(change, std::abs(load - loads_[k]));
      loads_[k] = load;
    }
    if (change < 1e-15) break;
  }
  latches_ = std::move(latches);
  effective_ = effective_fluxes(fluxes, config_.coupling, loads_);
}

std::vector<double> SimDevice::measure(std::span<const std::size_t> channels) {
  for (std::size_t c : channels) {
    if (c >= channel_count_) throw DeviceError("unknown readout channel " + std::to_string(c));
  }
  update_elements(true_fluxes().values());
  std::normal_distribution<double> noise(0.0, config_.noise_sigma > 0.0 ? config_.noise_sigma : 1.0);
  std::vector<double> out;
  out.reserve(channels.size());
  for (std::size_t c : channels) {
    const auto& ch = channels_[c];
    const auto& r = config_.resonators[ch.resonator];
    const double f_eff = r.flux_loop ? effective_[*r.flux_loop] : 0.0;
    double pull = 0.0;
    for (const auto& p : r.pulls) pull += p.shift * loads_[p.element];
    double v = transmission(ch.probe, resonator_frequency(r, f_eff, pull), r.linewidth, r.coupling);
    if (config_.noise_sigma > 0.0) v += noise(rng_);
    out.push_back(v);
  }
  ++measurements_;
  drift_.array() += config_.drift_rate;
  return out;
}

}  // namespace fluxcal

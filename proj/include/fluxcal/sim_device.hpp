#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fluxcal/device.hpp"
#include "fluxcal/types.hpp"

namespace fluxcal {

enum class LoopKind { qfp_z, qfp_x, resonator, qubit_z, qubit_x };

// Two-level flux element (QFP or flux qubit) in the persistent-current basis.
// Energies are normalized; persistent_current stands for I_p * Phi_0.
struct QfpParams {
  double persistent_current = 1.0;
  double delta_max = 0.1;
  bool hysteresis = false;
  // Below this tunneling amplitude the polarization sign is frozen.
  double delta_latch = 0.03;
};

struct LoopSpec {
  std::string name;
  LoopKind kind = LoopKind::resonator;
  // Z loop <-> X loop of the same element.
  std::optional<Index> partner;
  QfpParams element;
  // Resonator loops: circulating SQUID current, load = amplitude * sin(2 pi f_eff).
  double squid_current = 0.0;
};

struct DispersivePull {
  Index element = 0;  // Z loop of the element
  double shift = 0.0;  // frequency shift per unit load
};

// omega_r = base + modulation * cos(2 pi f_eff[flux_loop]) + sum(shift * load)
struct ResonatorParams {
  std::string name;
  double base_frequency = 0.0;
  double modulation = 0.0;
  std::optional<Index> flux_loop;
  double linewidth = 1.0;  // kappa_tot
  double coupling = 1.0;   // kappa_c
  std::vector<double> probes;
  std::vector<DispersivePull> pulls;
};

// Which readout channel exhibits a flux-periodic feature of a loop, where
// that feature sits in true flux, and the coordinates the other loops are
// parked at while it is tracked.
struct TrackingFeature {
  Index loop = 0;
  std::size_t channel = 0;
  double feature_flux = 0.0;
  std::vector<double> bias;
};

struct DeviceConfig {
  std::string name;
  CrosstalkMatrix crosstalk = CrosstalkMatrix::identity(1);
  FluxVector offsets;
  std::vector<LoopSpec> loops;
  std::vector<ResonatorParams> resonators;
  // coupling(k, j): flux added to loop k per unit load of loop j (the Z
  // loop of an element, or a resonator loop with a SQUID current).
  Matrix coupling;
  double noise_sigma = 0.0;
  double drift_rate = 0.0;  // flux quanta added to every loop per measurement
  std::uint64_t seed = 0;
  std::vector<TrackingFeature> tracking;
  // Flux-insensitive point of each loop in true flux; off-sweep biases are
  // placed a fixed distance away from these.
  std::vector<double> symmetry_points;

  Index loop_count() const { return static_cast<Index>(loops.size()); }
  std::size_t channel_count() const;
  // Throws DimensionError on inconsistent configuration.
  void validate() const;
};

struct QfpState {
  double polarization = 0.0;  // <sigma_z> in [-1, 1]
  int latch = 0;              // last relaxed sign, 0 = none yet
};

// f_Z at which the two persistent-current states are degenerate.
double qfp_symmetry_point(double f_x);
double qfp_tunneling(double f_x, const QfpParams& params);
// Energy bias: linear with slope I_p near the symmetry point and
// antiperiodic under f_Z -> f_Z + 1/2 so that the response is periodic in
// both loops.
double qfp_bias(double f_z, double f_x, const QfpParams& params);
double two_level_polarization(double bias, double tunneling);
QfpState qfp_ground_state(double f_z, double f_x, const QfpParams& params, int latch);
// Circulating-current load the element imposes on coupled loops.
double element_load(double polarization, double f_x);

// Load of a resonator SQUID loop.
double squid_load(double f_eff, double squid_current);

// f_eff = f + coupling * loads
Vector effective_fluxes(const Vector& fluxes, const Matrix& coupling, const Vector& loads);

double resonator_frequency(const ResonatorParams& r, double f_eff, double pull);
// |S21| of a notch-type resonator.
double transmission(double probe, double resonance, double linewidth, double coupling);
double resonator_response(double f_eff, double probe, const ResonatorParams& r);

struct TildeFluxes {
  double z = 0.0;
  double x = 0.0;
};
TildeFluxes to_tilde(double f_z, double f_x);
TildeFluxes from_tilde(double tilde_z, double tilde_x);

class SimDevice final : public DeviceBackend {
 public:
  explicit SimDevice(DeviceConfig config);

  Index loop_count() const override { return config_.loop_count(); }
  std::size_t channel_count() const override { return channel_count_; }
  void set_voltages(const VoltageVector& v) override;
  std::vector<double> measure(std::span<const std::size_t> channels) override;
  std::uint64_t measurement_count() const override { return measurements_; }

  // Clears latches and accumulated drift, reseeds the noise source.
  void reset();

  const DeviceConfig& config() const { return config_; }
  // Ground-truth fluxes for the current voltages, including drift.
  FluxVector true_fluxes() const;
  // Test hook: bias so that the true fluxes equal `f`.
  void set_true_fluxes(const FluxVector& f);
  const VoltageVector& voltages() const { return voltages_; }
  // Loads of the last measurement (zero for loops without a circulating current).
  const Vector& loads() const { return loads_; }

 private:
  struct Channel {
    std::size_t resonator;
    double probe;
  };

  void update_elements(const Vector& fluxes);

  DeviceConfig config_;
  std::vector<Channel> channels_;
  std::size_t channel_count_ = 0;
  VoltageVector voltages_;
  Vector drift_;
  Vector loads_;
  Vector effective_;
  std::vector<int> latches_;
  std::uint64_t measurements_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace fluxcal

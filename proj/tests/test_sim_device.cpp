#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fluxcal/errors.hpp"
#include "fluxcal/presets.hpp"
#include "fluxcal/serialization.hpp"
#include "fluxcal/sim_device.hpp"

using namespace fluxcal;

namespace {

DeviceConfig qfp_only(bool hysteresis) {
  DeviceConfig c;
  c.name = "qfp";
  c.crosstalk = CrosstalkMatrix::identity(2);
  c.offsets = FluxVector::zero(2);
  LoopSpec z{"Z", LoopKind::qfp_z, 1, {1.0, 0.1, hysteresis, 0.03}, 0.0};
  LoopSpec x{"X", LoopKind::qfp_x, 0, {}, 0.0};
  c.loops = {z, x};
  ResonatorParams r;
  r.name = "FR";
  r.base_frequency = 7000.0;
  r.linewidth = 5.0;
  r.coupling = 4.0;
  r.probes = {6995.0, 7000.0, 7005.0};
  r.pulls = {{0, 8.0}};
  c.resonators = {r};
  c.coupling = Matrix::Zero(2, 2);
  return c;
}

}  // namespace

TEST_CASE("notch transmission by hand") {
  // On resonance |1 - kc/k|; far away 1.
  CHECK(transmission(7000.0, 7000.0, 5.0, 4.0) == doctest::Approx(0.2));
  CHECK(transmission(1e6, 7000.0, 5.0, 4.0) == doctest::Approx(1.0).epsilon(1e-6));
  // Half a linewidth off: |1 - 0.5 kc / (k/2 + i k/2)| with k = 2, kc = 2.
  CHECK(transmission(1.0, 0.0, 2.0, 2.0) == doctest::Approx(std::abs(1.0 - 1.0 / std::complex<double>(1.0, 1.0))));
}

TEST_CASE("two-level polarization by hand") {
  CHECK(two_level_polarization(0.3, 0.8) == doctest::Approx(0.6));
  CHECK(two_level_polarization(-0.3, 0.8) == doctest::Approx(-0.6));
  CHECK(two_level_polarization(0.0, 0.8) == 0.0);
  CHECK(two_level_polarization(0.0, 0.0) == 0.0);
}

TEST_CASE("QFP bias vanishes on the symmetry line and is antiperiodic in f_Z") {
  const QfpParams p;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double fx = u(rng);
    const double fz = u(rng);
    CHECK(std::abs(qfp_bias(qfp_symmetry_point(fx), fx, p)) < 1e-15);
    CHECK(qfp_bias(fz + 0.5, fx, p) == doctest::Approx(-qfp_bias(fz, fx, p)).scale(1.0).epsilon(1e-12));
    CHECK(qfp_tunneling(fx + 1.0, p) == doctest::Approx(qfp_tunneling(fx, p)).scale(1.0).epsilon(1e-12));
  }
  CHECK(qfp_tunneling(0.0, p) == p.delta_max);
  CHECK(qfp_tunneling(0.5, p) < 1e-16);
}

TEST_CASE("tilde coordinates keep the QFP bias fixed while sweeping f~_X") {
  const QfpParams p;
  const auto a = from_tilde(0.55, 0.1);
  const auto b = from_tilde(0.55, 0.37);
  CHECK(qfp_bias(a.z, a.x, p) == doctest::Approx(qfp_bias(b.z, b.x, p)).scale(1.0));
  const auto t = to_tilde(0.3, -0.2);
  const auto back = from_tilde(t.z, t.x);
  CHECK(back.z == doctest::Approx(0.3));
  CHECK(back.x == doctest::Approx(-0.2));
}

TEST_CASE("latched QFP keeps its sign while tunneling is suppressed") {
  QfpParams p{1.0, 0.1, true, 0.03};
  // f_X near 1/2 suppresses tunneling below delta_latch.
  const double fx = 0.49;
  CHECK(qfp_tunneling(fx, p) < p.delta_latch);
  const double fz = qfp_symmetry_point(fx) - 0.1;  // negative bias
  const auto free = qfp_ground_state(fz, fx, p, 0);
  CHECK(free.polarization < 0.0);
  CHECK(free.latch == -1);
  const auto held = qfp_ground_state(fz, fx, p, +1);
  CHECK(held.polarization > 0.0);
  CHECK(held.latch == 1);
  // With enough tunneling the element relaxes to its ground state.
  const auto relaxed = qfp_ground_state(qfp_symmetry_point(0.0) - 0.1, 0.0, p, +1);
  CHECK(relaxed.polarization < 0.0);
}

TEST_CASE("readout is 1-periodic in every loop flux on the presets") {
  for (const auto& name : preset_names()) {
    SimDevice dev(load_preset(name));
    const Index n = dev.loop_count();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int rep = 0; rep < 10; ++rep) {
      FluxVector f = FluxVector::zero(n);
      for (Index k = 0; k < n; ++k) f[k] = u(rng);
      dev.set_true_fluxes(f);
      const auto base = dev.measure_all();
      for (Index k = 0; k < n; ++k) {
        FluxVector g = f;
        g[k] += 1.0;
        dev.set_true_fluxes(g);
        const auto moved = dev.measure_all();
        for (std::size_t c = 0; c < base.size(); ++c) CHECK(moved[c] == doctest::Approx(base[c]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("SQUID loads are self-consistent") {
  SimDevice dev(load_preset("paper-3loop"));
  const auto& cfg = dev.config();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int rep = 0; rep < 20; ++rep) {
    dev.set_true_fluxes(FluxVector{u(rng), u(rng), u(rng)});
    dev.measure_all();
    const Vector f = dev.true_fluxes().values();
    const Vector eff = effective_fluxes(f, cfg.coupling, dev.loads());
    for (Index k = 0; k < 3; ++k) {
      const auto& loop = cfg.loops[static_cast<std::size_t>(k)];
      if (loop.kind == LoopKind::resonator && loop.squid_current != 0.0) {
        CHECK(dev.loads()[k] == doctest::Approx(squid_load(eff[k], loop.squid_current)).epsilon(1e-12));
      }
      if (loop.kind == LoopKind::qfp_z) {
        const Index x = *loop.partner;
        const auto s = qfp_ground_state(eff[k], eff[x], loop.element, 0);
        CHECK(dev.loads()[k] == doctest::Approx(element_load(s.polarization, eff[x])).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("voltages map to fluxes through the configured crosstalk") {
  SimDevice dev(load_preset("paper-3loop"));
  const auto& cfg = dev.config();
  dev.set_voltages(VoltageVector{0.3, -0.1, 0.2});
  const Vector want = cfg.crosstalk.entries() * Vector(Eigen::Vector3d(0.3, -0.1, 0.2)) + cfg.offsets.values();
  CHECK((dev.true_fluxes().values() - want).cwiseAbs().maxCoeff() < 1e-15);
  dev.set_true_fluxes(FluxVector{0.1, 0.2, 0.3});
  CHECK(dev.true_fluxes()[2] == doctest::Approx(0.3));
}

TEST_CASE("noise is seeded and drift accumulates per measurement") {
  auto cfg = qfp_only(false);
  cfg.noise_sigma = 0.01;
  cfg.seed = 5;
  cfg.drift_rate = 1e-3;
  SimDevice a(cfg);
  SimDevice b(cfg);
  CHECK(a.measure_all() == b.measure_all());
  CHECK(a.measurement_count() == 1);
  CHECK(a.true_fluxes()[0] == doctest::Approx(1e-3));
  a.reset();
  CHECK(a.true_fluxes()[0] == 0.0);
  SimDevice quiet(qfp_only(false));
  CHECK(quiet.measure_all() == quiet.measure_all());
}

TEST_CASE("device errors") {
  SimDevice dev(qfp_only(false));
  const std::size_t bad[] = {7};
  CHECK_THROWS_AS(dev.measure(bad), DeviceError);
  CHECK_THROWS_AS(dev.set_voltages(VoltageVector{0.0}), DimensionError);
  auto cfg = qfp_only(false);
  cfg.loops[0].partner.reset();
  CHECK_THROWS_AS(SimDevice{cfg}, DimensionError);
  cfg = qfp_only(false);
  cfg.resonators[0].coupling = 6.0;
  CHECK_THROWS_AS(SimDevice{cfg}, DimensionError);
  cfg = qfp_only(false);
  cfg.coupling(0, 0) = 0.1;
  CHECK_THROWS_AS(SimDevice{cfg}, DimensionError);
}

TEST_CASE("presets are listed and unknown names are reported with the list") {
  const auto names = preset_names();
  CHECK(std::find(names.begin(), names.end(), "paper-3loop") != names.end());
  CHECK(std::find(names.begin(), names.end(), "paper-5loop") != names.end());
  try {
    load_preset("nope");
    FAIL("expected UnknownPreset");
  } catch (const UnknownPreset& e) {
    CHECK(std::string(e.what()).find("paper-3loop") != std::string::npos);
  }
  CHECK(load_preset("paper-5loop").loop_count() == 5);
}

TEST_CASE("device config survives a JSON round trip") {
  const auto cfg = load_preset("paper-3loop");
  const auto back = device_config_from_json(device_config_to_json(cfg));
  CHECK(back.crosstalk == cfg.crosstalk);
  CHECK(back.offsets == cfg.offsets);
  CHECK(back.coupling == cfg.coupling);
  CHECK(back.channel_count() == cfg.channel_count());
  CHECK(back.symmetry_points == cfg.symmetry_points);
  REQUIRE(back.tracking.size() == cfg.tracking.size());
  for (std::size_t k = 0; k < cfg.tracking.size(); ++k) CHECK(back.tracking[k].bias == cfg.tracking[k].bias);
  SimDevice a(cfg);
  SimDevice b(back);
  a.set_voltages(VoltageVector{0.1, 0.2, 0.3});
  b.set_voltages(VoltageVector{0.1, 0.2, 0.3});
  CHECK(a.measure_all() == b.measure_all());
}

TEST_CASE("mutual inductance and resistance give C = M R^-1") {
  const Json j = Json::parse(R"({
    "loops": [{"name": "A", "kind": "resonator"}, {"name": "B", "kind": "resonator"}],
    "mutual": {"n": 2, "entries": [2.0, 0.2, 0.1, 4.0]},
    "resistance": [2.0, 4.0],
    "resonators": [{"name": "R", "flux_loop": "A", "modulation": 5.0, "linewidth": 1.0, "probes": [0.0]}]
  })");
  const auto cfg = device_config_from_json(j);
  CHECK(cfg.crosstalk(0, 0) == 1.0);
  CHECK(cfg.crosstalk(0, 1) == 0.05);
  CHECK(cfg.crosstalk(1, 0) == 0.05);
  CHECK(cfg.crosstalk(1, 1) == 1.0);
}

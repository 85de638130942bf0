#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fluxcal/calibrator.hpp"
#include "fluxcal/errors.hpp"
#include "fluxcal/log.hpp"
#include "fluxcal/presets.hpp"
#include "fluxcal/session.hpp"
#include "fluxcal/translation.hpp"

using namespace fluxcal;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string preset;
  std::string device_config;
  std::string method = "periodicity";
  std::uint64_t seed = 0;
  std::size_t budget = 80;
  std::size_t n_init = 20;
  std::string algorithm = "bayes";
  double bounds = 0.2;
  double delta = 0.02;
  double span = 2.2;
  double init_error = 0.1;
  std::optional<double> noise;
  bool from_baseline = false;
  std::size_t max_iters = 4;
  double tol = 3e-3;
  std::string out;
};

struct Device {
  DeviceConfig config;
  std::string source;
};

Device load_device(const RunConfig& rc) {
  if (!rc.preset.empty() && !rc.device_config.empty()) throw UsageError("--preset and --device-config are exclusive");
  Device d;
  if (!rc.device_config.empty()) {
    d.config = load_device_config(rc.device_config);
    d.source = rc.device_config;
  } else {
    const std::string name = rc.preset.empty() ? "paper-3loop" : rc.preset;
    try {
      d.config = load_preset(name);
    } catch (const UnknownPreset& e) {
      throw UsageError(e.what());
    }
    d.source = name;
  }
  if (rc.noise) d.config.noise_sigma = *rc.noise;
  return d;
}

fs::path output_root(const RunConfig& rc) {
  if (!rc.out.empty()) return rc.out;
  if (const char* env = std::getenv("FLUXCAL_OUT"); env && *env) return env;
  return "fluxcal-out";
}

// Replaces a previous session in `dir`; refuses to touch anything else.
fs::path fresh_session_dir(const fs::path& dir) {
  if (fs::exists(dir)) {
    if (!fs::exists(dir / "session.json") && !fs::is_empty(dir)) {
      throw std::runtime_error(dir.string() + " exists and is not a session directory");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

Json run_config_json(const RunConfig& rc, const Device& d) {
  return Json{{"source", d.source},
              {"device", device_config_to_json(d.config)},
              {"method", rc.method},
              {"seed", rc.seed},
              {"init_error", rc.init_error},
              {"from_baseline", rc.from_baseline}};
}

OptimizerConfig optimizer_for(const RunConfig& rc, Index loops) {
  auto oc = OptimizerConfig::with_bounds(static_cast<std::size_t>(std::max<Index>(loops - 1, 0)), rc.bounds);
  oc.n_total = rc.budget;
  oc.n_init = std::min(rc.n_init, rc.budget);
  oc.seed = rc.seed;
  try {
    oc.algorithm = algorithm_from_string(rc.algorithm);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return oc;
}

SweepSettings sweep_for(const RunConfig& rc, const DeviceConfig& cfg) {
  SweepSettings s;
  s.delta = rc.delta;
  s.span_periods = rc.span;
  s.hints.symmetry_points = cfg.symmetry_points;
  return s;
}

void print_matrix(const std::string& title, const Matrix& m) {
  std::printf("%s\n", title.c_str());
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) std::printf(" %22s", format_double(m(r, c)).c_str());
    std::printf("\n");
  }
}

struct Outcome {
  std::string label;
  fs::path dir;
  std::optional<double> max_error;
  std::uint64_t measurements = 0;
  double seconds = 0.0;
  bool complete = false;
};

Outcome run_translation(const RunConfig& rc, const Device& d, SimDevice& dev, const Coordinates& start,
                        std::size_t max_iters, const fs::path& dir, const std::string& label) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto before = dev.measurement_count();
  TranslationRun run;
  run.start = start;
  run.settings.delta = rc.delta;
  run.tracking = d.config.tracking;
  run.result.reference = start;
  try {
    run.result = run_until_converged(dev, run.tracking, max_iters, rc.tol, run.settings, &start, &run.scans);
    run.complete = true;
  } catch (const std::exception& e) {
    run.error = e.what();
    std::fprintf(stderr, "translation baseline failed: %s\n", e.what());
  }
  SessionContext ctx{run_config_json(rc, d), d.config.crosstalk};
  write_translation_session(fresh_session_dir(dir), run, ctx);

  Outcome o{label, dir, std::nullopt, dev.measurement_count() - before,
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), run.complete};
  std::printf("== %s (%s)\n", label.c_str(), dir.string().c_str());
  for (const auto& it : run.result.iterations) {
    std::printf("iteration %zu: max |C' - I| off-diagonal %s%s\n", it.index,
                format_double(max_abs_off_diagonal(it.c_prime.entries())).c_str(),
                it.low_confidence ? " (low confidence)" : "");
  }
  std::printf("converged: %s\n", run.result.converged ? "yes" : "no");
  print_matrix("C_ref", run.result.reference.c.entries());
  if (!run.result.iterations.empty()) {
    const Matrix e = truth_error(d.config.crosstalk, run.result.reference.c);
    o.max_error = e.cwiseAbs().maxCoeff();
    std::printf("max |C_true C_ref^-1 - I| = %s\n", format_double(*o.max_error).c_str());
  }
  return o;
}

Outcome run_periodicity(const RunConfig& rc, const Device& d, SimDevice& dev, const CrosstalkMatrix& c_init,
                        const FluxVector& f0_init, const fs::path& dir, const std::string& label) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto before = dev.measurement_count();
  const Index n = d.config.loop_count();
  auto session = calibrate_all(dev, c_init, f0_init, optimizer_for(rc, n), sweep_for(rc, d.config));
  SessionContext ctx{run_config_json(rc, d), d.config.crosstalk};
  write_calibration_session(fresh_session_dir(dir), session, ctx);

  Outcome o{label, dir, std::nullopt, dev.measurement_count() - before,
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), session.complete};
  std::printf("== %s (%s)\n", label.c_str(), dir.string().c_str());
  for (const auto& run : session.loops) {
    const auto& r = run.result;
    std::printf("loop %ld (%s): Omega' =", static_cast<long>(r.compensation.target_loop()),
                d.config.loops[static_cast<std::size_t>(r.compensation.target_loop())].name.c_str());
    for (double p : r.compensation.free_params()) std::printf(" %s", format_double(p).c_str());
    std::printf("  period %s  P %s%s\n", format_double(r.period).c_str(), format_double(r.score).c_str(),
                run.complete ? "" : ("  INCOMPLETE: " + run.error).c_str());
  }
  if (session.updated_estimate) {
    print_matrix("C estimate", session.updated_estimate->entries());
    const Matrix e = truth_error(d.config.crosstalk, *session.updated_estimate);
    o.max_error = e.cwiseAbs().maxCoeff();
    std::printf("max |C_true C'^-1 - I| = %s\n", format_double(*o.max_error).c_str());
  }
  return o;
}

int cmd_calibrate(const RunConfig& rc) {
  if (rc.method != "periodicity" && rc.method != "translation" && rc.method != "both") {
    throw UsageError("unknown method '" + rc.method + "' (periodicity, translation, both)");
  }
  const Device d = load_device(rc);
  const Index n = d.config.loop_count();
  const fs::path root = output_root(rc);
  const std::string tag = "seed" + std::to_string(rc.seed);
  const CrosstalkMatrix c_init = perturb_off_diagonal(d.config.crosstalk, rc.init_error, rc.seed);
  const FluxVector f0_init = d.config.offsets;

  std::vector<Outcome> outcomes;
  if (rc.method != "periodicity") {
    SimDevice dev(d.config);
    outcomes.push_back(run_translation(rc, d, dev, Coordinates::voltages(n), rc.max_iters,
                                       root / ("translation-" + tag), "translation"));
  }
  if (rc.method != "translation") {
    SimDevice dev(d.config);
    CrosstalkMatrix start = c_init;
    FluxVector offsets = f0_init;
    if (rc.from_baseline) {
      const auto base = run_translation(rc, d, dev, Coordinates::voltages(n), 1, root / ("baseline-" + tag),
                                        "baseline iteration");
      outcomes.push_back(base);
      const auto j = read_json_file(base.dir / "session.json");
      if (!base.complete) throw std::runtime_error("baseline iteration failed");
      start = crosstalk_from_json(j.at("reference").at("c"));
      offsets = FluxVector(vector_from_json(j.at("reference").at("f0")));
    }
    outcomes.push_back(run_periodicity(rc, d, dev, start, offsets, root / ("periodicity-" + tag), "periodicity"));
  }

  if (outcomes.size() > 1) {
    std::printf("\n%-20s %-24s %-14s %-10s %s\n", "method", "max |C_true C^-1 - I|", "measurements", "seconds",
                "complete");
    for (const auto& o : outcomes) {
      std::printf("%-20s %-24s %-14llu %-10.1f %s\n", o.label.c_str(),
                  o.max_error ? format_double(*o.max_error).c_str() : "-",
                  static_cast<unsigned long long>(o.measurements), o.seconds, o.complete ? "yes" : "no");
    }
  }
  for (const auto& o : outcomes) {
    if (!o.complete) return kFailure;
  }
  return kOk;
}

struct LandscapeArgs {
  Index loop = 0;
  std::vector<Index> params;
  double range = 0.1;
  std::size_t points = 21;
};

std::vector<double> grid(double range, std::size_t points) {
  std::vector<double> v(points);
  for (std::size_t k = 0; k < points; ++k) {
    v[k] = points == 1 ? 0.0 : -range + 2.0 * range * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return v;
}

int cmd_landscape(const RunConfig& rc, const LandscapeArgs& la) {
  const Device d = load_device(rc);
  const Index n = d.config.loop_count();
  if (la.loop < 0 || la.loop >= n) throw UsageError("--loop out of range");
  if (la.params.empty() || la.params.size() > 2) throw UsageError("--param takes one or two loop indices");
  for (auto p : la.params) {
    if (p < 0 || p >= n || p == la.loop) throw UsageError("--param must name another loop");
  }
  SimDevice dev(d.config);
  LandscapeRun run;
  run.c_init = perturb_off_diagonal(d.config.crosstalk, rc.init_error, rc.seed);
  run.f0_init = d.config.offsets;
  run.sweep = sweep_for(rc, d.config);
  run.loop = la.loop;
  run.axes = la.params;
  run.a_values = grid(la.range, la.points);
  if (la.params.size() == 1) {
    run.points = scan_landscape_1d(dev, run.c_init, run.f0_init, la.loop, la.params[0], run.a_values, run.sweep,
                                   &run.sweeps);
  } else {
    run.b_values = run.a_values;
    const Matrix p = scan_landscape_2d(dev, run.c_init, run.f0_init, la.loop, la.params[0], la.params[1],
                                       run.a_values, run.b_values, run.sweep, &run.sweeps);
    for (std::size_t r = 0; r < run.a_values.size(); ++r) {
      for (std::size_t c = 0; c < run.b_values.size(); ++c) {
        LandscapePoint pt;
        TrialCompensation omega(n, la.loop);
        omega.set(la.params[0], run.a_values[r]);
        omega.set(la.params[1], run.b_values[c]);
        pt.params = omega.free_params();
        pt.score = p(static_cast<Index>(r), static_cast<Index>(c));
        pt.failed = pt.score == -1.0;
        run.points.push_back(pt);
      }
    }
  }
  std::string suffix;
  for (auto p : la.params) suffix += "-" + std::to_string(p);
  const fs::path dir = output_root(rc) / ("landscape-loop" + std::to_string(la.loop) + suffix + "-seed" +
                                          std::to_string(rc.seed));
  Json config = run_config_json(rc, d);
  config["method"] = "landscape";
  write_landscape_session(fresh_session_dir(dir), run, {config, d.config.crosstalk});
  std::fputs(landscape_csv(run).c_str(), stdout);
  std::fprintf(stderr, "wrote %s\n", (dir / "landscape" / "scan.csv").string().c_str());
  return kOk;
}

int cmd_replay(const std::vector<std::string>& dirs) {
  int rc = kOk;
  for (const auto& dir : dirs) {
    const auto report = replay_session(dir);
    for (const auto& note : report.notes) std::printf("%s: %s\n", dir.c_str(), note.c_str());
    if (report.ok) {
      std::printf("%s: %s session replayed, %zu numbers match\n", dir.c_str(), report.method.c_str(), report.checked);
    } else {
      std::printf("%s: MISMATCH %s\n", dir.c_str(), report.mismatch.c_str());
      rc = kFailure;
    }
  }
  return rc;
}

void add_device_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--preset", rc.preset, "Built-in device preset (default paper-3loop)");
  cmd->add_option("--device-config", rc.device_config, "Device JSON file");
  cmd->add_option("--seed", rc.seed, "Seed for the initial estimate and the optimizer");
  cmd->add_option("--delta", rc.delta, "Sweep step in flux quanta");
  cmd->add_option("--span", rc.span, "Sweep span in periods");
  cmd->add_option("--init-error", rc.init_error, "Relative off-diagonal error of the initial estimate");
  cmd->add_option("--noise", rc.noise, "Override the readout noise of the simulated device");
  cmd->add_option("--out", rc.out, "Output root (default $FLUXCAL_OUT or ./fluxcal-out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flux crosstalk calibration on simulated devices"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* calibrate = app.add_subcommand("calibrate", "Run a calibration and write a session directory");
  add_device_flags(calibrate, rc);
  calibrate->add_option("--method", rc.method, "periodicity, translation or both");
  calibrate->add_option("--budget", rc.budget, "Objective evaluations per loop");
  calibrate->add_option("--n-init", rc.n_init, "Random initial evaluations before EI");
  calibrate->add_option("--algorithm", rc.algorithm, "bayes or spsa");
  calibrate->add_option("--bounds", rc.bounds, "Compensation parameters stay within [-b, b]");
  calibrate->add_flag("--from-baseline", rc.from_baseline, "Seed periodicity with one translation iteration");
  calibrate->add_option("--max-iters", rc.max_iters, "Translation iterations");
  calibrate->add_option("--tol", rc.tol, "Translation convergence tolerance");

  LandscapeArgs la;
  auto* landscape = app.add_subcommand("landscape", "Scan P over one or two compensation parameters");
  add_device_flags(landscape, rc);
  landscape->add_option("--loop", la.loop, "Target loop i")->required();
  landscape->add_option("--param", la.params, "Loop j of Omega_{j,i}; give two for a 2D grid")->required();
  landscape->add_option("--range", la.range, "Grid covers [-range, range]");
  landscape->add_option("--points", la.points, "Grid points per axis");

  std::vector<std::string> dirs;
  auto* replay = app.add_subcommand("replay", "Recompute a session from its raw sweeps");
  replay->add_option("dirs", dirs, "Session directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (landscape->parsed()) rc.init_error = landscape->count("--init-error") ? rc.init_error : 0.0;

  try {
    if (calibrate->parsed()) return cmd_calibrate(rc);
    if (landscape->parsed()) return cmd_landscape(rc, la);
    return cmd_replay(dirs);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}

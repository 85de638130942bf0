#include "fluxcal/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fluxcal/errors.hpp"

namespace fluxcal {

namespace fs = std::filesystem;

Json optimizer_to_json(const OptimizerConfig& c) {
  Json bounds = Json::array();
  for (const auto& b : c.bounds) bounds.push_back({b.lo, b.hi});
  return Json{{"algorithm", to_string(c.algorithm)},
              {"bounds", bounds},
              {"n_init", c.n_init},
              {"n_total", c.n_total},
              {"seed", c.seed},
              {"candidates", c.candidates},
              {"local_fraction", c.local_fraction},
              {"gp",
               {{"length_scale", c.gp.length_scale},
                {"signal_sd", c.gp.signal_sd},
                {"noise_sd", c.gp.noise_sd},
                {"log_gap", c.gp.log_gap}}},
              {"spsa",
               {{"a", c.spsa.a}, {"c", c.spsa.c}, {"A", c.spsa.big_a}, {"alpha", c.spsa.alpha}, {"gamma", c.spsa.gamma}}}};
}

Json sweep_settings_to_json(const SweepSettings& s) {
  Json overrides = Json::array();
  for (const auto& o : s.hints.overrides) overrides.push_back(o ? Json(*o) : Json(nullptr));
  return Json{{"delta", s.delta},
              {"span_periods", s.span_periods},
              {"period_guess", s.period_guess},
              {"refine_span", s.refine_span},
              {"off_sweep_distance", s.hints.distance},
              {"symmetry_points", s.hints.symmetry_points},
              {"overrides", overrides},
              {"channels", s.channels}};
}

Json translation_settings_to_json(const TranslationSettings& s) {
  return Json{{"delta", s.delta}, {"steps", s.steps}, {"window", s.window}, {"max_residual", s.max_residual}};
}

TranslationSettings translation_settings_from_json(const Json& j) {
  TranslationSettings s;
  s.delta = j.at("delta").get<double>();
  s.steps = j.at("steps").get<std::vector<double>>();
  s.window = j.at("window").get<double>();
  s.max_residual = j.at("max_residual").get<double>();
  return s;
}

Json tracking_to_json(const std::vector<TrackingFeature>& tracking) {
  Json out = Json::array();
  for (const auto& t : tracking) {
    out.push_back({{"loop", t.loop}, {"channel", t.channel}, {"feature_flux", t.feature_flux}, {"bias", t.bias}});
  }
  return out;
}

std::vector<TrackingFeature> tracking_from_json(const Json& j) {
  std::vector<TrackingFeature> out;
  for (const auto& t : j) {
    out.push_back({t.at("loop").get<Index>(), t.at("channel").get<std::size_t>(), t.at("feature_flux").get<double>(),
                   t.at("bias").get<std::vector<double>>()});
  }
  return out;
}

Matrix truth_error(const CrosstalkMatrix& c_true, const CrosstalkMatrix& estimate) {
  if (c_true.size() != estimate.size()) throw DimensionError("estimate does not match the true matrix");
  const Index n = c_true.size();
  return c_true.entries() * estimate.inverse() - Matrix::Identity(n, n);
}

namespace {

std::string sweep_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

// FNV-1a over the CSV text; lets replay flag edits that no derived number sees.
std::string digest(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Writes sweeps/NNNN.{csv,json}; returns the index used.
std::size_t write_sweep(const fs::path& dir, std::size_t index, const SweepRecord& record, const Json& extra) {
  const auto csv = sweep_to_csv(record);
  Json meta = sweep_metadata(record);
  meta.update(extra);
  meta["digest"] = digest(csv);
  const auto stem = sweep_stem(index);
  write_text_file(dir / "sweeps" / (stem + ".csv"), csv);
  write_json(dir / "sweeps" / (stem + ".json"), meta);
  return index;
}

Json header(const std::string& method, const SessionContext& ctx) {
  Json j{{"schema_version", kSessionSchemaVersion}, {"method", method}, {"config", ctx.config}};
  if (ctx.c_true) j["c_true"] = to_json(*ctx.c_true);
  return j;
}

void add_truth(Json& j, const SessionContext& ctx, const CrosstalkMatrix& estimate) {
  if (!ctx.c_true) return;
  const Matrix e = truth_error(*ctx.c_true, estimate);
  j["truth_error"] = matrix_to_json(e);
  j["max_truth_error"] = e.cwiseAbs().maxCoeff();
}

void prepare(const fs::path& dir) {
  fs::create_directories(dir / "sweeps");
}

Json coords_to_json(const Coordinates& c) { return Json{{"c", to_json(c.c)}, {"f0", vector_to_json(c.f0.values())}}; }

Coordinates coords_from_json(const Json& j) {
  return {crosstalk_from_json(j.at("c")), FluxVector(vector_from_json(j.at("f0")))};
}

}  // namespace

void write_calibration_session(const fs::path& dir, const CalibrationSession& session, const SessionContext& ctx) {
  prepare(dir);
  Json j = header(session.method, ctx);
  j["optimizer"] = optimizer_to_json(session.optimizer);
  j["sweep"] = sweep_settings_to_json(session.sweep);
  j["c_init"] = to_json(session.c_init);
  j["f0_init"] = vector_to_json(session.f0_init.values());

  std::size_t index = 0;
  std::string history;
  Json loops = Json::array();
  for (std::size_t k = 0; k < session.loops.size(); ++k) {
    const auto& run = session.loops[k];
    const auto& r = run.result;
    loops.push_back({{"loop", r.compensation.target_loop()},
                     {"params", r.compensation.free_params()},
                     {"period", r.period},
                     {"score", r.score},
                     {"evaluations", r.history.size()},
                     {"complete", run.complete},
                     {"error", run.error}});
    for (const auto& e : r.history.entries()) {
      history += Json{{"loop", r.compensation.target_loop()},
                      {"step", e.step},
                      {"params", e.params},
                      {"value", e.value},
                      {"timestamp", e.timestamp}}
                     .dump();
      history += '\n';
    }
    for (const auto& s : run.sweeps) {
      write_sweep(dir, index++, s.record, {{"role", to_string(s.role)}, {"step", s.step}, {"params", s.params}});
    }
  }
  j["loops"] = loops;
  j["sweep_count"] = index;
  if (session.residual_estimate) j["residual_estimate"] = to_json(*session.residual_estimate);
  if (session.updated_estimate) {
    j["updated_estimate"] = to_json(*session.updated_estimate);
    add_truth(j, ctx, *session.updated_estimate);
  }
  j["complete"] = session.complete;
  write_text_file(dir / "history.jsonl", history);
  write_json(dir / "session.json", j);
}

void write_translation_session(const fs::path& dir, const TranslationRun& run, const SessionContext& ctx) {
  prepare(dir);
  Json j = header("translation", ctx);
  j["settings"] = translation_settings_to_json(run.settings);
  j["tracking"] = tracking_to_json(run.tracking);
  j["start"] = coords_to_json(run.start);

  Json iterations = Json::array();
  for (const auto& it : run.result.iterations) {
    Json elements = Json::array();
    for (const auto& d : it.diagnostics) {
      Json couplings = Json::array();
      for (const auto& c : d.couplings) {
        couplings.push_back({{"swept", c.swept},
                             {"values", c.values},
                             {"positions", c.positions},
                             {"slope", c.slope},
                             {"intercept", c.intercept},
                             {"max_residual", c.max_residual},
                             {"low_confidence", c.low_confidence}});
      }
      elements.push_back({{"loop", d.loop},
                          {"channel", d.channel},
                          {"position", d.position},
                          {"period", d.period},
                          {"couplings", couplings}});
    }
    iterations.push_back({{"index", it.index},
                          {"c_prime", to_json(it.c_prime)},
                          {"f0_prime", vector_to_json(it.f0_prime.values())},
                          {"low_confidence", it.low_confidence},
                          {"elements", elements}});
  }
  j["iterations"] = iterations;
  j["reference"] = coords_to_json(run.result.reference);
  if (!run.result.iterations.empty()) {
    const auto product = product_of_estimates(run.result.iterations);
    j["product"] = to_json(product);
    add_truth(j, ctx, run.result.reference.c);
  }
  j["converged"] = run.result.converged;
  j["complete"] = run.complete;
  j["error"] = run.error;

  std::size_t index = 0;
  for (const auto& s : run.scans) {
    write_sweep(dir, index++, s.record,
                {{"role", to_string(s.role)}, {"iteration", s.iteration}, {"swept", s.swept}, {"swept_value", s.swept_value}});
  }
  j["sweep_count"] = index;
  write_json(dir / "session.json", j);
}

std::string landscape_csv(const LandscapeRun& run) {
  std::string out;
  for (const auto a : run.axes) out += "omega_" + std::to_string(a) + "_" + std::to_string(run.loop) + ",";
  out += "P\n";
  const std::size_t cols = run.axes.size() == 2 ? run.b_values.size() : 1;
  for (std::size_t k = 0; k < run.points.size(); ++k) {
    if (run.axes.size() == 2) {
      out += format_double(run.a_values[k / cols]) + "," + format_double(run.b_values[k % cols]) + ",";
    } else {
      out += format_double(run.a_values[k]) + ",";
    }
    out += format_double(run.points[k].score) + "\n";
  }
  return out;
}

void write_landscape_session(const fs::path& dir, const LandscapeRun& run, const SessionContext& ctx) {
  prepare(dir);
  fs::create_directories(dir / "landscape");
  Json j = header("landscape", ctx);
  j["sweep"] = sweep_settings_to_json(run.sweep);
  j["c_init"] = to_json(run.c_init);
  j["f0_init"] = vector_to_json(run.f0_init.values());
  j["loop"] = run.loop;
  j["axes"] = run.axes;
  j["a_values"] = run.a_values;
  j["b_values"] = run.b_values;
  Json points = Json::array();
  for (const auto& p : run.points) points.push_back({{"params", p.params}, {"score", p.score}, {"failed", p.failed}});
  j["points"] = points;
  std::size_t index = 0;
  for (const auto& s : run.sweeps) {
    write_sweep(dir, index++, s.record, {{"role", to_string(s.role)}, {"step", s.step}, {"params", s.params}});
  }
  j["sweep_count"] = index;
  j["complete"] = true;
  write_text_file(dir / "landscape" / "scan.csv", landscape_csv(run));
  write_json(dir / "session.json", j);
}

namespace {

struct StoredSweep {
  std::string file;
  Json meta;
  SweepRecord record;
};

class Checker;

std::vector<StoredSweep> load_sweeps(const fs::path& dir, std::size_t count, Checker& check);

class Checker {
 public:
  explicit Checker(ReplayReport& report) : report_(report) {}

  bool same(double stored, double recomputed, const std::string& where) {
    ++report_.checked;
    if (stored == recomputed || (std::isnan(stored) && std::isnan(recomputed))) return true;
    fail(where + ": stored " + format_double(stored) + ", recomputed " + format_double(recomputed));
    return false;
  }

  void same(const Matrix& stored, const Matrix& recomputed, const std::string& where) {
    if (stored.rows() != recomputed.rows() || stored.cols() != recomputed.cols()) {
      fail(where + ": shape differs");
      return;
    }
    for (Index r = 0; r < stored.rows(); ++r) {
      for (Index c = 0; c < stored.cols(); ++c) {
        if (!same(stored(r, c), recomputed(r, c), where + "[" + std::to_string(r) + "," + std::to_string(c) + "]")) {
          return;
        }
      }
    }
  }

  void same(const Vector& stored, const Vector& recomputed, const std::string& where) {
    if (stored.size() != recomputed.size()) {
      fail(where + ": length differs");
      return;
    }
    for (Index k = 0; k < stored.size(); ++k) {
      if (!same(stored[k], recomputed[k], where + "[" + std::to_string(k) + "]")) return;
    }
  }

  void fail(const std::string& what) {
    if (report_.ok) {
      report_.ok = false;
      report_.mismatch = what;
    }
  }

  bool ok() const { return report_.ok; }

 private:
  ReplayReport& report_;
};

std::vector<StoredSweep> load_sweeps(const fs::path& dir, std::size_t count, Checker& check) {
  std::vector<StoredSweep> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto stem = sweep_stem(k);
    const std::string file = "sweeps/" + stem + ".csv";
    const Json meta = read_json_file(dir / "sweeps" / (stem + ".json"));
    const auto csv = read_text_file(dir / file);
    if (meta.at("digest").get<std::string>() != digest(csv)) check.fail(file + ": content digest differs");
    auto record = sweep_from_csv(csv, meta.at("loop").get<Index>(), meta.at("start").get<double>(),
                                 meta.at("delta").get<double>());
    if (record.points() != meta.at("points").get<std::size_t>() ||
        record.channels() != meta.at("channels").get<std::size_t>()) {
      check.fail(file + ": shape differs from metadata");
    }
    out.push_back({file, meta, std::move(record)});
  }
  return out;
}

struct Recomputed {
  double score = -1.0;
  double period = 0.0;
  bool failed = false;
};

// Mirrors measure_periodicity_objective on persisted sweeps.
Recomputed recompute(const StoredSweep& primary, const StoredSweep* shifted, Checker& check) {
  Recomputed out;
  PeriodFit fit;
  try {
    fit = analyze_primary(primary.record);
  } catch (const std::exception&) {
    out.failed = true;
    if (shifted) check.fail(shifted->file + ": shifted sweep after a failed period fit");
    return out;
  }
  out.period = fit.tau * primary.record.delta();
  if (!shifted) {
    check.fail(primary.file + ": shifted sweep missing");
    return out;
  }
  check.same(shifted->record.start(), shifted_start(primary.record, fit), shifted->file + " start");
  try {
    out.score = score_periodicity(primary.record, shifted->record);
  } catch (const std::exception&) {
    out.failed = true;
    out.score = -1.0;
  }
  return out;
}

struct SweepPair {
  const StoredSweep* primary = nullptr;
  const StoredSweep* shifted = nullptr;
};

// Pairs of (primary or final, shifted) sweeps keyed by step, for sweeps whose
// loop is `loop` (or all sweeps when loop < 0).
std::map<std::size_t, SweepPair> pair_by_step(const std::vector<StoredSweep>& sweeps, Index loop, Checker& check) {
  std::map<std::size_t, SweepPair> out;
  for (const auto& s : sweeps) {
    if (loop >= 0 && s.record.loop() != loop) continue;
    const auto step = s.meta.at("step").get<std::size_t>();
    const auto role = sweep_role_from_string(s.meta.at("role").get<std::string>());
    auto& pair = out[step];
    if (role == SweepRole::shifted) {
      if (pair.shifted || !pair.primary) check.fail(s.file + ": unexpected shifted sweep");
      pair.shifted = &s;
    } else {
      if (pair.primary) check.fail(s.file + ": second primary sweep for step " + std::to_string(step));
      pair.primary = &s;
    }
  }
  return out;
}

bool same_params(const StoredSweep& s, const std::vector<double>& params) {
  return s.meta.at("params").get<std::vector<double>>() == params;
}

void replay_calibration(const fs::path& dir, const Json& j, ReplayReport& report) {
  Checker check(report);
  const auto sweeps = load_sweeps(dir, j.at("sweep_count").get<std::size_t>(), check);
  std::map<Index, std::vector<Json>> history;
  {
    std::istringstream in(read_text_file(dir / "history.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json e = Json::parse(line);
      history[e.at("loop").get<Index>()].push_back(e);
    }
  }
  const CrosstalkMatrix c_init = crosstalk_from_json(j.at("c_init"));
  const Index n = c_init.size();

  std::vector<LoopCalibrationResult> results;
  bool all = true;
  for (const auto& l : j.at("loops")) {
    const auto i = l.at("loop").get<Index>();
    const std::string where = "loop " + std::to_string(i);
    if (!l.at("complete").get<bool>()) {
      report.notes.push_back(where + " is incomplete; skipped");
      all = false;
      continue;
    }
    const auto pairs = pair_by_step(sweeps, i, check);
    const auto& evals = history[i];
    if (evals.size() != l.at("evaluations").get<std::size_t>()) check.fail(where + ": history length differs");
    for (const auto& e : evals) {
      const auto step = e.at("step").get<std::size_t>();
      const auto params = e.at("params").get<std::vector<double>>();
      const auto it = pairs.find(step);
      if (it == pairs.end() || !it->second.primary) {
        check.fail(where + " step " + std::to_string(step) + ": primary sweep missing");
        continue;
      }
      if (!same_params(*it->second.primary, params)) check.fail(it->second.primary->file + ": params differ from history");
      const auto r = recompute(*it->second.primary, it->second.shifted, check);
      check.same(e.at("value").get<double>(), r.score,
                 where + " step " + std::to_string(step) + " (" + it->second.primary->file + ") P");
    }
    const auto params = l.at("params").get<std::vector<double>>();
    const auto fin = pairs.find(evals.size());
    if (fin == pairs.end() || !fin->second.primary) {
      check.fail(where + ": final sweep missing");
      continue;
    }
    if (!same_params(*fin->second.primary, params)) check.fail(fin->second.primary->file + ": params differ from result");
    const auto r = recompute(*fin->second.primary, fin->second.shifted, check);
    check.same(l.at("period").get<double>(), r.period, where + " period (" + fin->second.primary->file + ")");
    check.same(l.at("score").get<double>(), r.score, where + " final P (" + fin->second.primary->file + ")");
    results.push_back({TrialCompensation(n, i, params), r.period, r.score, {}});
  }
  if (!all || !j.contains("residual_estimate")) return;
  const auto residual = assemble_residual_estimate(results);
  check.same(matrix_from_json(j.at("residual_estimate")), residual.entries(), "residual_estimate");
  const auto updated = update_estimate(c_init, residual);
  check.same(matrix_from_json(j.at("updated_estimate")), updated.entries(), "updated_estimate");
  if (j.contains("c_true")) {
    const Matrix e = truth_error(crosstalk_from_json(j.at("c_true")), updated);
    check.same(matrix_from_json(j.at("truth_error")), e, "truth_error");
    check.same(j.at("max_truth_error").get<double>(), e.cwiseAbs().maxCoeff(), "max_truth_error");
  }
}

double scan_position(const StoredSweep& s, Checker& check) {
  try {
    return feature_from_scan(s.record).position;
  } catch (const std::exception& e) {
    check.fail(s.file + ": " + e.what());
    return 0.0;
  }
}

void replay_translation(const fs::path& dir, const Json& j, ReplayReport& report) {
  Checker check(report);
  const auto sweeps = load_sweeps(dir, j.at("sweep_count").get<std::size_t>(), check);
  const auto settings = translation_settings_from_json(j.at("settings"));
  const auto tracking = tracking_from_json(j.at("tracking"));
  Coordinates coords = coords_from_json(j.at("start"));
  const Index n = coords.c.size();

  std::vector<IterationEstimate> iterations;
  for (const auto& it : j.at("iterations")) {
    const auto index = it.at("index").get<std::size_t>();
    const std::string where = "iteration " + std::to_string(index);
    Matrix c_prime = Matrix::Zero(n, n);
    Vector f0_prime = Vector::Zero(n);
    for (const auto& el : it.at("elements")) {
      const auto i = el.at("loop").get<Index>();
      const std::string at = where + " loop " + std::to_string(i);
      std::vector<const StoredSweep*> firsts;
      std::vector<const StoredSweep*> nexts;
      std::map<Index, std::vector<const StoredSweep*>> coupling;
      for (const auto& s : sweeps) {
        if (s.meta.at("iteration").get<std::size_t>() != index || s.record.loop() != i) continue;
        const auto role = scan_role_from_string(s.meta.at("role").get<std::string>());
        if (role == ScanRole::first) firsts.push_back(&s);
        if (role == ScanRole::next) nexts.push_back(&s);
        if (role == ScanRole::coupling) coupling[s.meta.at("swept").get<Index>()].push_back(&s);
      }
      if (firsts.empty() || nexts.size() != 1) {
        check.fail(at + ": tracking scans missing");
        return;
      }
      ElementDiagnostics diag;
      diag.loop = i;
      try {
        diag.position = feature_from_scan(firsts[0]->record).position;
      } catch (const FitError&) {
        if (firsts.size() < 2) {
          check.fail(firsts[0]->file + ": first sighting failed without a retry");
          return;
        }
        diag.position = scan_position(*firsts[1], check);
      }
      diag.period = scan_position(*nexts[0], check) - diag.position;
      check.same(el.at("position").get<double>(), diag.position, at + " position");
      check.same(el.at("period").get<double>(), diag.period, at + " period");
      for (const auto& c : el.at("couplings")) {
        const auto swept = c.at("swept").get<Index>();
        std::vector<double> values;
        std::vector<double> positions;
        for (const auto* s : coupling[swept]) {
          values.push_back(s->meta.at("swept_value").get<double>());
          positions.push_back(scan_position(*s, check));
        }
        const std::string cw = at + " vs loop " + std::to_string(swept);
        if (values.size() != c.at("values").size()) {
          check.fail(cw + ": scan count differs");
          return;
        }
        auto est = fit_coupling(swept, values, positions, settings.max_residual);
        check.same(vector_from_json(c.at("values")), vector_from_json(Json(est.values)), cw + " values");
        check.same(vector_from_json(c.at("positions")), vector_from_json(Json(est.positions)), cw + " positions");
        check.same(c.at("slope").get<double>(), est.slope, cw + " slope");
        diag.couplings.push_back(std::move(est));
      }
      const auto feature = std::find_if(tracking.begin(), tracking.end(), [i](const TrackingFeature& t) { return t.loop == i; });
      if (feature == tracking.end()) {
        check.fail(at + ": no tracking entry");
        return;
      }
      assemble_row(diag, *feature, c_prime, f0_prime);
    }
    check.same(matrix_from_json(it.at("c_prime")), c_prime, where + " c_prime");
    check.same(vector_from_json(it.at("f0_prime")), f0_prime, where + " f0_prime");
    IterationEstimate est{index, CrosstalkMatrix(c_prime), FluxVector(f0_prime), {}, false};
    coords = compose(coords, est);
    iterations.push_back(std::move(est));
  }
  const auto stored = coords_from_json(j.at("reference"));
  check.same(stored.c.entries(), coords.c.entries(), "reference c");
  check.same(stored.f0.values(), coords.f0.values(), "reference f0");
  if (iterations.empty()) return;
  check.same(matrix_from_json(j.at("product")), product_of_estimates(iterations).entries(), "product");
  if (j.contains("c_true")) {
    const Matrix e = truth_error(crosstalk_from_json(j.at("c_true")), coords.c);
    check.same(matrix_from_json(j.at("truth_error")), e, "truth_error");
    check.same(j.at("max_truth_error").get<double>(), e.cwiseAbs().maxCoeff(), "max_truth_error");
  }
  if (!j.at("complete").get<bool>()) report.notes.push_back("session is incomplete; replayed finished iterations only");
}

void replay_landscape(const fs::path& dir, const Json& j, ReplayReport& report) {
  Checker check(report);
  const auto sweeps = load_sweeps(dir, j.at("sweep_count").get<std::size_t>(), check);
  const auto pairs = pair_by_step(sweeps, -1, check);
  LandscapeRun run;
  run.loop = j.at("loop").get<Index>();
  run.axes = j.at("axes").get<std::vector<Index>>();
  run.a_values = j.at("a_values").get<std::vector<double>>();
  run.b_values = j.at("b_values").get<std::vector<double>>();
  const auto& points = j.at("points");
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    LandscapePoint point;
    point.params = p.at("params").get<std::vector<double>>();
    const std::string where = "landscape point " + std::to_string(k);
    const auto it = pairs.find(k);
    if (it == pairs.end() || !it->second.primary) {
      // A backend failure before any sweep leaves the sentinel only.
      point.failed = true;
      if (!p.at("failed").get<bool>()) check.fail(where + ": sweeps missing");
    } else {
      if (!same_params(*it->second.primary, point.params)) check.fail(it->second.primary->file + ": params differ");
      const auto r = recompute(*it->second.primary, it->second.shifted, check);
      point.score = r.score;
      point.failed = r.failed;
      check.same(p.at("score").get<double>(), r.score, where + " (" + it->second.primary->file + ") P");
      if (p.at("failed").get<bool>() != r.failed) check.fail(where + ": failure flag differs");
    }
    run.points.push_back(point);
  }
  ++report.checked;
  if (read_text_file(dir / "landscape" / "scan.csv") != landscape_csv(run)) check.fail("landscape/scan.csv differs");
}

}  // namespace

ReplayReport replay_session(const fs::path& dir) {
  const Json j = read_json_file(dir / "session.json");
  ReplayReport report;
  const auto version = j.at("schema_version").get<int>();
  if (version != kSessionSchemaVersion) {
    throw std::runtime_error("unsupported session schema_version " + std::to_string(version));
  }
  report.method = j.at("method").get<std::string>();
  if (report.method == "periodicity") {
    replay_calibration(dir, j, report);
  } else if (report.method == "translation") {
    replay_translation(dir, j, report);
  } else if (report.method == "landscape") {
    replay_landscape(dir, j, report);
  } else {
    throw std::runtime_error("unknown session method '" + report.method + "'");
  }
  return report;
}

}  // namespace fluxcal

#include "fluxcal/serialization.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fluxcal/errors.hpp"

namespace fluxcal {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json matrix_to_json(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("only square matrices serialize");
  Json entries = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) entries.push_back(m(i, j));
  }
  return Json{{"n", m.rows()}, {"entries", entries}};
}

Matrix matrix_from_json(const Json& j) {
  const auto n = j.at("n").get<Index>();
  const auto& entries = j.at("entries");
  if (n <= 0 || entries.size() != static_cast<std::size_t>(n * n)) {
    throw DimensionError("matrix JSON needs n*n entries");
  }
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) m(i, k) = entries[static_cast<std::size_t>(i * n + k)].get<double>();
  }
  return m;
}

Json to_json(const CrosstalkMatrix& c) { return matrix_to_json(c.entries()); }
CrosstalkMatrix crosstalk_from_json(const Json& j) { return CrosstalkMatrix(matrix_from_json(j)); }

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = j[i].get<double>();
  return v;
}

LoopKind loop_kind_from_string(std::string_view s) {
  if (s == "qfp-z") return LoopKind::qfp_z;
  if (s == "qfp-x") return LoopKind::qfp_x;
  if (s == "resonator") return LoopKind::resonator;
  if (s == "qubit-z") return LoopKind::qubit_z;
  if (s == "qubit-x") return LoopKind::qubit_x;
  throw DimensionError("unknown loop kind '" + std::string(s) + "'");
}

std::string to_string(LoopKind kind) {
  switch (kind) {
    case LoopKind::qfp_z: return "qfp-z";
    case LoopKind::qfp_x: return "qfp-x";
    case LoopKind::resonator: return "resonator";
    case LoopKind::qubit_z: return "qubit-z";
    case LoopKind::qubit_x: return "qubit-x";
  }
  return "resonator";
}

namespace {

Index loop_index(const std::vector<LoopSpec>& loops, const Json& ref) {
  if (ref.is_number_integer()) return ref.get<Index>();
  const auto name = ref.get<std::string>();
  for (std::size_t k = 0; k < loops.size(); ++k) {
    if (loops[k].name == name) return static_cast<Index>(k);
  }
  throw DimensionError("unknown loop '" + name + "'");
}

}  // namespace

DeviceConfig device_config_from_json(const Json& j) {
  DeviceConfig c;
  c.name = j.value("name", std::string("custom"));
  for (const auto& l : j.at("loops")) {
    LoopSpec spec;
    spec.name = l.at("name").get<std::string>();
    spec.kind = loop_kind_from_string(l.at("kind").get<std::string>());
    if (l.contains("element")) {
      const auto& e = l.at("element");
      spec.element.persistent_current = e.value("persistent_current", spec.element.persistent_current);
      spec.element.delta_max = e.value("delta_max", spec.element.delta_max);
      spec.element.hysteresis = e.value("hysteresis", spec.element.hysteresis);
      spec.element.delta_latch = e.value("delta_latch", spec.element.delta_latch);
    }
    spec.squid_current = l.value("squid_current", 0.0);
    c.loops.push_back(spec);
  }
  // Partners may be forward references, so resolve after all names exist.
  const auto& jloops = j.at("loops");
  for (std::size_t k = 0; k < c.loops.size(); ++k) {
    if (jloops[k].contains("partner")) c.loops[k].partner = loop_index(c.loops, jloops[k].at("partner"));
  }
  const Index n = c.loop_count();

  if (j.contains("crosstalk")) {
    c.crosstalk = crosstalk_from_json(j.at("crosstalk"));
  } else if (j.contains("mutual") && j.contains("resistance")) {
    const Matrix mutual = matrix_from_json(j.at("mutual"));
    const Vector resistance = vector_from_json(j.at("resistance"));
    if (resistance.size() != mutual.rows()) throw DimensionError("resistance must have one entry per line");
    if ((resistance.array() == 0.0).any()) throw DimensionError("resistance entries must be non-zero");
    c.crosstalk = CrosstalkMatrix(mutual * resistance.cwiseInverse().asDiagonal());
  } else {
    throw DimensionError("device config needs 'crosstalk' or 'mutual' + 'resistance'");
  }
  c.offsets = j.contains("offsets") ? FluxVector(vector_from_json(j.at("offsets"))) : FluxVector::zero(n);

  c.coupling = Matrix::Zero(n, n);
  if (j.contains("couplings")) {
    for (const auto& k : j.at("couplings")) {
      c.coupling(loop_index(c.loops, k.at("loop")), loop_index(c.loops, k.at("element"))) = k.at("value").get<double>();
    }
  }

  for (const auto& r : j.value("resonators", Json::array())) {
    ResonatorParams p;
    p.name = r.at("name").get<std::string>();
    p.base_frequency = r.value("base_frequency", 0.0);
    p.modulation = r.value("modulation", 0.0);
    if (r.contains("flux_loop")) p.flux_loop = loop_index(c.loops, r.at("flux_loop"));
    p.linewidth = r.value("linewidth", 1.0);
    p.coupling = r.value("coupling", p.linewidth);
    p.probes = r.at("probes").get<std::vector<double>>();
    for (const auto& pull : r.value("pulls", Json::array())) {
      p.pulls.push_back({loop_index(c.loops, pull.at("element")), pull.at("shift").get<double>()});
    }
    c.resonators.push_back(std::move(p));
  }
  c.noise_sigma = j.value("noise_sigma", 0.0);
  c.drift_rate = j.value("drift_rate", 0.0);
  c.seed = j.value("seed", std::uint64_t{0});

  c.symmetry_points.assign(static_cast<std::size_t>(n), 0.0);
  if (j.contains("hints")) {
    const Json sym = j.at("hints").value("symmetry_points", Json::object());
    for (const auto& [name, value] : sym.items()) {
      c.symmetry_points[static_cast<std::size_t>(loop_index(c.loops, Json(name)))] = value.get<double>();
    }
  }
  for (const auto& t : j.value("tracking", Json::array())) {
    TrackingFeature f;
    f.loop = loop_index(c.loops, t.at("loop"));
    f.channel = t.at("channel").get<std::size_t>();
    f.feature_flux = t.value("feature_flux", 0.0);
    f.bias.assign(static_cast<std::size_t>(n), 0.15);
    const Json bias = t.value("bias", Json::object());
    for (const auto& [name, value] : bias.items()) {
      f.bias[static_cast<std::size_t>(loop_index(c.loops, Json(name)))] = value.get<double>();
    }
    c.tracking.push_back(std::move(f));
  }
  c.validate();
  return c;
}

Json device_config_to_json(const DeviceConfig& c) {
  Json j;
  j["name"] = c.name;
  Json loops = Json::array();
  for (const auto& l : c.loops) {
    Json e{{"name", l.name}, {"kind", to_string(l.kind)}};
    if (l.partner) e["partner"] = c.loops[static_cast<std::size_t>(*l.partner)].name;
    if (l.kind == LoopKind::qfp_z || l.kind == LoopKind::qubit_z) {
      e["element"] = Json{{"persistent_current", l.element.persistent_current},
                          {"delta_max", l.element.delta_max},
                          {"hysteresis", l.element.hysteresis},
                          {"delta_latch", l.element.delta_latch}};
    }
    if (l.squid_current != 0.0) e["squid_current"] = l.squid_current;
    loops.push_back(e);
  }
  j["loops"] = loops;
  j["crosstalk"] = to_json(c.crosstalk);
  j["offsets"] = vector_to_json(c.offsets.values());
  Json couplings = Json::array();
  for (Index k = 0; k < c.coupling.rows(); ++k) {
    for (Index e = 0; e < c.coupling.cols(); ++e) {
      if (c.coupling(k, e) != 0.0) {
        couplings.push_back(Json{{"loop", c.loops[static_cast<std::size_t>(k)].name},
                                 {"element", c.loops[static_cast<std::size_t>(e)].name},
                                 {"value", c.coupling(k, e)}});
      }
    }
  }
  j["couplings"] = couplings;
  Json resonators = Json::array();
  for (const auto& r : c.resonators) {
    Json e{{"name", r.name},         {"base_frequency", r.base_frequency}, {"modulation", r.modulation},
           {"linewidth", r.linewidth}, {"coupling", r.coupling},             {"probes", r.probes}};
    if (r.flux_loop) e["flux_loop"] = c.loops[static_cast<std::size_t>(*r.flux_loop)].name;
    Json pulls = Json::array();
    for (const auto& p : r.pulls) {
      pulls.push_back(Json{{"element", c.loops[static_cast<std::size_t>(p.element)].name}, {"shift", p.shift}});
    }
    e["pulls"] = pulls;
    resonators.push_back(e);
  }
  j["resonators"] = resonators;
  j["noise_sigma"] = c.noise_sigma;
  j["drift_rate"] = c.drift_rate;
  j["seed"] = c.seed;
  Json tracking = Json::array();
  for (const auto& t : c.tracking) {
    Json bias = Json::object();
    for (std::size_t k = 0; k < t.bias.size(); ++k) {
      if (static_cast<Index>(k) != t.loop) bias[c.loops[k].name] = t.bias[k];
    }
    tracking.push_back(Json{{"loop", c.loops[static_cast<std::size_t>(t.loop)].name},
                            {"channel", t.channel},
                            {"feature_flux", t.feature_flux},
                            {"bias", bias}});
  }
  j["tracking"] = tracking;
  if (!c.symmetry_points.empty()) {
    Json sym = Json::object();
    for (std::size_t k = 0; k < c.symmetry_points.size(); ++k) sym[c.loops[k].name] = c.symmetry_points[k];
    j["hints"] = Json{{"symmetry_points", sym}};
  }
  return j;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Json::parse(in);
}

DeviceConfig load_device_config(const std::filesystem::path& path) {
  return device_config_from_json(read_json_file(path));
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sweep_to_csv(const SweepRecord& record) {
  std::string out = "f_prime";
  for (std::size_t l = 0; l < record.channels(); ++l) out += ",ch" + std::to_string(l);
  out += '\n';
  for (std::size_t s = 0; s < record.points(); ++s) {
    out += format_double(record.coordinate(s));
    for (std::size_t l = 0; l < record.channels(); ++l) {
      out += ',';
      out += format_double(record.value(l, s));
    }
    out += '\n';
  }
  return out;
}

SweepRecord sweep_from_csv(std::string_view csv, Index loop, double start, double delta) {
  std::vector<std::vector<double>> rows;
  std::size_t channels = 0;
  bool header = true;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const auto line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t c = 0;
    while (true) {
      const auto comma = line.find(',', c);
      cells.push_back(line.substr(c, comma == std::string_view::npos ? std::string_view::npos : comma - c));
      if (comma == std::string_view::npos) break;
      c = comma + 1;
    }
    if (header) {
      if (cells.empty() || cells[0] != "f_prime") throw DimensionError("sweep CSV lacks the f_prime header");
      channels = cells.size() - 1;
      header = false;
      continue;
    }
    if (cells.size() != channels + 1) {
      throw DimensionError("sweep CSV line " + std::to_string(line_no) + " has the wrong number of cells");
    }
    std::vector<double> row;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const std::string cell(cells[k]);
      char* endp = nullptr;
      const double v = std::strtod(cell.c_str(), &endp);
      if (endp == cell.c_str() || *endp != '\0') {
        throw DimensionError("sweep CSV line " + std::to_string(line_no) + " has a malformed number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  std::vector<double> values(channels * rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    for (std::size_t l = 0; l < channels; ++l) values[l * rows.size() + s] = rows[s][l];
  }
  return SweepRecord(loop, start, delta, channels, rows.size(), std::move(values));
}

Json sweep_metadata(const SweepRecord& record) {
  return Json{{"loop", record.loop()},
              {"delta", record.delta()},
              {"start", record.start()},
              {"points", record.points()},
              {"channels", record.channels()}};
}

}  // namespace fluxcal

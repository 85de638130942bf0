#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "fluxcal/periodicity.hpp"
#include "fluxcal/sim_device.hpp"
#include "fluxcal/types.hpp"

namespace fluxcal {

using Json = nlohmann::json;

// Shortest text that round-trips to the same double (17 significant digits).
std::string format_double(double x);

// {"n": n, "entries": [row-major n*n numbers]}
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json to_json(const CrosstalkMatrix& c);
CrosstalkMatrix crosstalk_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

LoopKind loop_kind_from_string(std::string_view s);
std::string to_string(LoopKind kind);

// Accepts either "crosstalk" or "mutual" + diagonal "resistance"
// (C = M R^-1). Loop references inside the file are by name.
DeviceConfig device_config_from_json(const Json& j);
Json device_config_to_json(const DeviceConfig& config);
DeviceConfig load_device_config(const std::filesystem::path& path);

// CSV: header "f_prime,ch0,...", one row per sweep point.
std::string sweep_to_csv(const SweepRecord& record);
SweepRecord sweep_from_csv(std::string_view csv, Index loop, double start, double delta);
Json sweep_metadata(const SweepRecord& record);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fluxcal

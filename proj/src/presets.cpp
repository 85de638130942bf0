#include "fluxcal/presets.hpp"

#include <cstdlib>
#include <filesystem>

#include "fluxcal/serialization.hpp"
#include "presets_embedded.hpp"

namespace fluxcal {

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : embedded_presets) names.emplace_back(p.name);
  return names;
}

DeviceConfig load_preset(std::string_view name) {
  // A file in FLUXCAL_PRESET_DIR shadows the built-in copy.
  if (const char* dir = std::getenv("FLUXCAL_PRESET_DIR")) {
    const auto path = std::filesystem::path(dir) / (std::string(name) + ".json");
    if (std::filesystem::exists(path)) return load_device_config(path);
  }
  for (const auto& p : embedded_presets) {
    if (p.name == name) return device_config_from_json(Json::parse(p.json));
  }
  std::string msg = "unknown preset '" + std::string(name) + "'; available:";
  for (const auto& n : preset_names()) msg += " " + n;
  throw UnknownPreset(msg);
}

}  // namespace fluxcal

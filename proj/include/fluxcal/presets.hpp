#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fluxcal/sim_device.hpp"

namespace fluxcal {

struct UnknownPreset : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> preset_names();
// Throws UnknownPreset listing the available names.
DeviceConfig load_preset(std::string_view name);

}  // namespace fluxcal

#pragma once

#include <functional>
#include <string>

namespace fluxcal::log {

enum class Level { debug, info, warn, error, off };

using Sink = std::function<void(Level, const std::string&)>;

// Messages below the threshold are discarded. Default threshold is `warn`,
// overridable through FLUXCAL_LOG=debug|info|warn|error|off.
void set_level(Level level);
Level level();
void set_sink(Sink sink);

void write(Level level, const std::string& message);
inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }

}  // namespace fluxcal::log

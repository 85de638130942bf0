#include "fluxcal/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace fluxcal::log {
namespace {

Level level_from_env() {
  const char* env = std::getenv("FLUXCAL_LOG");
  if (env == nullptr) return Level::warn;
  const std::string_view v(env);
  if (v == "debug") return Level::debug;
  if (v == "info") return Level::info;
  if (v == "error") return Level::error;
  if (v == "off") return Level::off;
  return Level::warn;
}

struct State {
  std::mutex mu;
  Level threshold = level_from_env();
  Sink sink;
};

State& state() {
  static State s;
  return s;
}

const char* tag(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: break;
  }
  return "";
}

}  // namespace

void set_level(Level l) {
  std::lock_guard lock(state().mu);
  state().threshold = l;
}

Level level() {
  std::lock_guard lock(state().mu);
  return state().threshold;
}

void set_sink(Sink sink) {
  std::lock_guard lock(state().mu);
  state().sink = std::move(sink);
}

void write(Level l, const std::string& message) {
  auto& s = state();
  std::lock_guard lock(s.mu);
  if (l < s.threshold || s.threshold == Level::off) return;
  if (s.sink) {
    s.sink(l, message);
  } else {
    std::cerr << "[fluxcal " << tag(l) << "] " << message << '\n';
  }
}

}  // namespace fluxcal::log

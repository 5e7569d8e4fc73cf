#pragma once

// Minimal stderr logger. Level from MMDDRCCP_LOG: error, warn (default), info, debug.

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>
#include <string>

namespace mmd_drccp::logging {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("MMDDRCCP_LOG");
    if (!env) return Level::Warn;
    if (!std::strcmp(env, "error") || !std::strcmp(env, "quiet")) return Level::Error;
    if (!std::strcmp(env, "info")) return Level::Info;
    if (!std::strcmp(env, "debug")) return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

inline void emit(Level level, const char* tag, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[mmd_drccp " << tag << "] " << msg << "\n";
}

inline void error(const std::string& msg) { emit(Level::Error, "error", msg); }
inline void warn(const std::string& msg) { emit(Level::Warn, "warn", msg); }
inline void info(const std::string& msg) { emit(Level::Info, "info", msg); }
inline void debug(const std::string& msg) { emit(Level::Debug, "debug", msg); }

}  // namespace mmd_drccp::logging

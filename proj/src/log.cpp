// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/log.hpp"

#include <cstdlib>
#include <iostream>

namespace lf {

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("LAYOUTFORGE_LOG");
    if (!env) return LogLevel::Error;
    std::string s(env);
    if (s == "debug") return LogLevel::Debug;
    if (s == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

void log_message(LogLevel lvl, const std::string& msg) {
  const char* tag = lvl == LogLevel::Error ? "error" : lvl == LogLevel::Info ? "info" : "debug";
  std::cerr << "[layoutforge:" << tag << "] " << msg << "\n";
}

}  // namespace lf

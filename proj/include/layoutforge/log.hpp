// SPDX-License-Identifier: Apache-2.0
//
// stderr logger gated by LAYOUTFORGE_LOG={error,info,debug}.

#pragma once

#include <string>

namespace lf {

enum class LogLevel : int { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level();
void log_message(LogLevel lvl, const std::string& msg);

}  // namespace lf

#define LF_LOG_ERROR(msg) ::lf::log_message(::lf::LogLevel::Error, (msg))
#define LF_LOG_INFO(msg)                                      \
  do {                                                        \
    if (::lf::log_level() >= ::lf::LogLevel::Info)            \
      ::lf::log_message(::lf::LogLevel::Info, (msg));         \
  } while (0)
#define LF_LOG_DEBUG(msg)                                     \
  do {                                                        \
    if (::lf::log_level() >= ::lf::LogLevel::Debug)           \
      ::lf::log_message(::lf::LogLevel::Debug, (msg));        \
  } while (0)

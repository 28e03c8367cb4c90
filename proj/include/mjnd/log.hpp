#pragma once

#include <sstream>
#include <string_view>

namespace mjnd {

/// Progress lines go to stderr unless silenced (tests silence them).
void set_log_enabled(bool enabled);
void log_line(std::string_view line);

template <typename... Args>
void log_info(const Args&... args) {
  std::ostringstream out;
  (out << ... << args);
  log_line(out.str());
}

}  // namespace mjnd

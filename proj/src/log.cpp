#include "mjnd/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>

namespace mjnd {
namespace {
std::atomic<bool> g_enabled{true};
}

void set_log_enabled(bool enabled) { g_enabled = enabled; }

void log_line(std::string_view line) {
  if (!g_enabled) return;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[16];
  std::strftime(stamp, sizeof stamp, "%H:%M:%S", &tm);
  std::fprintf(stderr, "[%s] %.*s\n", stamp, static_cast<int>(line.size()), line.data());
}

}  // namespace mjnd

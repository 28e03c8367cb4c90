#include "mjnd/digest.hpp"

#include <charconv>
#include <cstdio>

#include "mjnd/errors.hpp"

namespace mjnd {

std::string to_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::uint64_t from_hex(std::string_view text) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out, 16);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ArgumentError("malformed digest: '" + std::string(text) + "'");
  }
  return out;
}

}  // namespace mjnd

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mjnd {

/// Incremental 64-bit FNV-1a. Used for parameter, dataset and config digests;
/// collisions are not a security concern here, staleness detection is.
class Fnv1a {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a& update(std::span<const std::byte> bytes) noexcept {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
    return *this;
  }

  Fnv1a& update(std::string_view text) noexcept {
    return update(std::as_bytes(std::span(text.data(), text.size())));
  }

  template <typename T>
  Fnv1a& update_value(const T& value) noexcept {
    return update(std::as_bytes(std::span(&value, 1)));
  }

  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

/// 16-char lowercase hex rendering of a digest.
std::string to_hex(std::uint64_t digest);

/// Inverse of to_hex; throws ArgumentError on malformed input.
std::uint64_t from_hex(std::string_view text);

}  // namespace mjnd

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace medsync {

// A SHA-256 value. The all-zero digest marks the genesis predecessor.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  // Throws Error(ParseError) unless `text` is exactly 64 lowercase/uppercase hex digits.
  static Digest from_hex(std::string_view text);
  static Digest zero() { return Digest{}; }

  auto operator<=>(const Digest&) const = default;
};

Digest sha256(std::string_view data);

}  // namespace medsync

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attestgate {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

/// Lowercase hex, no prefix.
std::string to_hex(std::span<const std::uint8_t> data);

/// Strict inverse of to_hex: rejects uppercase, odd length and non-hex
/// characters with Errc::ParseError so that every byte string has exactly
/// one accepted spelling.
Bytes from_hex(std::string_view hex);

Digest digest_from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

constexpr Digest zero_digest() { return Digest{}; }

}  // namespace attestgate

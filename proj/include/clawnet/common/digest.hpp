#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace clawnet {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr Digest kZeroDigest{};

Digest sha256(std::string_view data);

std::string to_hex(const Digest& d);

/// Lowercase 64-char hex only; anything else is rejected.
bool from_hex(std::string_view hex, Digest& out);

inline std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

}  // namespace clawnet

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace clawnet::identity {

inline constexpr std::size_t kMaxPathBytes = 4096;

/// Lexical normalization of an absolute path: collapses repeated separators,
/// `.` and `..` segments and strips a trailing separator. Returns nullopt for
/// empty or relative input, control characters, input longer than
/// kMaxPathBytes, and any `..` that would climb above the root. Never touches
/// a file system.
std::optional<std::string> normalize_path(std::string_view path);

bool is_normalized(std::string_view path);

/// True iff `path` equals `prefix` or lies beneath it. Both must already be
/// normalized.
bool path_within(std::string_view prefix, std::string_view path);

}  // namespace clawnet::identity

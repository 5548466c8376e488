#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clawnet {

/// Ordered key/value list; order is significant in canonical form.
using Fields = std::vector<std::pair<std::string, std::string>>;

/// Canonical single-line encoding shared by audit logs, wire frames,
/// memory files, backup indexes and traces.
///
///   token  := key '=' length ':' value
///   line   := token (' ' token)*
///
/// `value` is escaped (`\\`, `\n`, `\r`) so lines never contain a newline,
/// and `length` is the decimal byte count of the escaped value with no
/// leading zeros. Keys are `[a-z0-9_.]+`.
std::string escape_value(std::string_view raw);
std::optional<std::string> unescape_value(std::string_view escaped);

class CanonicalWriter {
public:
    CanonicalWriter& add(std::string_view key, std::string_view value);
    CanonicalWriter& add(std::string_view key, long long value);
    CanonicalWriter& add_all(const Fields& fields);

    const std::string& str() const noexcept { return out_; }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

/// Strict parse; returns nullopt on anything that is not in canonical form.
std::optional<Fields> parse_canonical(std::string_view line);

std::string encode_fields(const Fields& fields);

/// First value for `key`, if present.
std::optional<std::string> field(const Fields& fields, std::string_view key);

}  // namespace clawnet

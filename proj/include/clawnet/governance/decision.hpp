#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace clawnet::governance {

enum class DenyReason {
    // L1 (server, lexical)
    out_of_scope,
    class_insufficient,
    identity_retired,
    malformed_path,
    // L2 (node, resolves links)
    outside_whitelist,
    symlink_escape,
    malformed,
    // both
    internal_error,
};

std::string_view to_string(DenyReason r) noexcept;
std::optional<DenyReason> parse_deny_reason(std::string_view text) noexcept;

struct Decision {
    bool allowed = false;
    std::optional<DenyReason> reason;
    std::string detail;

    static Decision allow() { return Decision{true, std::nullopt, {}}; }
    static Decision deny(DenyReason r, std::string detail = {}) { return Decision{false, r, std::move(detail)}; }

    explicit operator bool() const noexcept { return allowed; }
};

}  // namespace clawnet::governance

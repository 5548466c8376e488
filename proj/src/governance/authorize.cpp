#include "clawnet/governance/authorize.hpp"

#include "clawnet/identity/path.hpp"

namespace clawnet::governance {

std::string_view to_string(DenyReason r) noexcept {
    switch (r) {
        case DenyReason::out_of_scope: return "out_of_scope";
        case DenyReason::class_insufficient: return "class_insufficient";
        case DenyReason::identity_retired: return "identity_retired";
        case DenyReason::malformed_path: return "malformed_path";
        case DenyReason::outside_whitelist: return "outside_whitelist";
        case DenyReason::symlink_escape: return "symlink_escape";
        case DenyReason::malformed: return "malformed";
        case DenyReason::internal_error: return "internal_error";
    }
    return "internal_error";
}

std::optional<DenyReason> parse_deny_reason(std::string_view text) noexcept {
    for (auto r : {DenyReason::out_of_scope, DenyReason::class_insufficient, DenyReason::identity_retired,
                   DenyReason::malformed_path, DenyReason::outside_whitelist, DenyReason::symlink_escape,
                   DenyReason::malformed, DenyReason::internal_error})
        if (to_string(r) == text) return r;
    return std::nullopt;
}

Decision authorize_l1(const Operation& op, const identity::IdentityAgent& identity) noexcept {
    try {
        if (!identity.active()) return Decision::deny(DenyReason::identity_retired, identity.id.str());
        if (op.issuer != identity.id)
            return Decision::deny(DenyReason::internal_error, "issuer does not match identity");
        if (!op.well_formed()) return Decision::deny(DenyReason::malformed_path, "wrong target count");

        const auto needed = op_class(op.kind);
        for (const auto& raw : op.targets) {
            auto path = identity::normalize_path(raw);
            if (!path) return Decision::deny(DenyReason::malformed_path, raw);
            if (identity.scope.permits(*path, needed)) continue;
            if (identity.scope.reaches(*path)) return Decision::deny(DenyReason::class_insufficient, *path);
            return Decision::deny(DenyReason::out_of_scope, *path);
        }
        return Decision::allow();
    } catch (...) {
        return Decision::deny(DenyReason::internal_error);
    }
}

}  // namespace clawnet::governance

#pragma once

#include "clawnet/common/ids.hpp"
#include "clawnet/identity/scope.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawnet::governance {

/// The node endpoint's file primitive set. `remove` is spelled "delete" on
/// the wire and in logs.
enum class OpKind { read, list, stat, write, move, rename, copy, mkdir, remove };

inline constexpr std::array<OpKind, 9> kAllOpKinds = {OpKind::read, OpKind::list,   OpKind::stat,
                                                     OpKind::write, OpKind::move,   OpKind::rename,
                                                     OpKind::copy,  OpKind::mkdir, OpKind::remove};

std::string_view to_string(OpKind k) noexcept;
std::optional<OpKind> parse_op_kind(std::string_view text) noexcept;

identity::OpClass op_class(OpKind k) noexcept;
inline bool is_mutative(OpKind k) noexcept { return op_class(k) == identity::OpClass::mutative; }

/// move/rename/copy take (source, destination); everything else one path.
std::size_t target_count(OpKind k) noexcept;

struct Operation {
    OpKind kind = OpKind::read;
    std::vector<std::string> targets;
    IdentityId issuer;
    std::optional<SessionId> session;
    std::string payload_digest;

    bool well_formed() const noexcept { return targets.size() == target_count(kind); }
};

}  // namespace clawnet::governance

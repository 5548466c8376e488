#include "clawnet/governance/operation.hpp"

namespace clawnet::governance {

std::string_view to_string(OpKind k) noexcept {
    switch (k) {
        case OpKind::read: return "read";
        case OpKind::list: return "list";
        case OpKind::stat: return "stat";
        case OpKind::write: return "write";
        case OpKind::move: return "move";
        case OpKind::rename: return "rename";
        case OpKind::copy: return "copy";
        case OpKind::mkdir: return "mkdir";
        case OpKind::remove: return "delete";
    }
    return "?";
}

std::optional<OpKind> parse_op_kind(std::string_view text) noexcept {
    for (auto k : kAllOpKinds)
        if (to_string(k) == text) return k;
    return std::nullopt;
}

identity::OpClass op_class(OpKind k) noexcept {
    switch (k) {
        case OpKind::read:
        case OpKind::list:
        case OpKind::stat: return identity::OpClass::read_only;
        default: return identity::OpClass::mutative;
    }
}

std::size_t target_count(OpKind k) noexcept {
    switch (k) {
        case OpKind::move:
        case OpKind::rename:
        case OpKind::copy: return 2;
        default: return 1;
    }
}

}  // namespace clawnet::governance

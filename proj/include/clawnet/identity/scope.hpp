#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawnet::identity {

enum class OpClass { read_only, mutative };

std::string_view to_string(OpClass c) noexcept;
std::optional<OpClass> parse_op_class(std::string_view text) noexcept;

/// A mutative grant implies read_only on the same prefix.
inline bool covers(OpClass granted, OpClass needed) noexcept {
    return granted == OpClass::mutative || needed == OpClass::read_only;
}

struct Grant {
    std::string prefix;
    OpClass op_class = OpClass::read_only;

    friend bool operator==(const Grant&, const Grant&) = default;
};

/// Normalized path-prefix grants. The empty scope denies everything.
class AuthorizationScope {
public:
    AuthorizationScope() = default;

    /// Throws Error(InvalidArgument) if any prefix is not normalized.
    explicit AuthorizationScope(std::vector<Grant> grants);

    /// `prefix:class[,prefix:class...]`, e.g. `/home/li/work:mutative`.
    static AuthorizationScope parse(std::string_view text);

    const std::vector<Grant>& grants() const noexcept { return grants_; }
    bool empty() const noexcept { return grants_.empty(); }

    /// Some grant contains `path` (normalized) with a class covering `needed`.
    bool permits(std::string_view path, OpClass needed) const;

    /// Some grant contains `path`, whatever its class.
    bool reaches(std::string_view path) const;

    /// Every grant prefix lies within one of `roots`.
    bool within(const std::vector<std::string>& roots) const;

    std::string to_string() const;

    friend bool operator==(const AuthorizationScope&, const AuthorizationScope&) = default;

private:
    std::vector<Grant> grants_;
};

}  // namespace clawnet::identity

#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

namespace clawnet {

/// Opaque string identifier tagged by the kind of thing it names.
template <typename Tag>
class StrongId {
public:
    StrongId() = default;
    explicit StrongId(std::string value) : value_(std::move(value)) {}

    const std::string& str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }

    friend auto operator<=>(const StrongId&, const StrongId&) = default;
    friend bool operator==(const StrongId&, const StrongId&) = default;

    friend std::ostream& operator<<(std::ostream& os, const StrongId& id) { return os << id.value_; }

private:
    std::string value_;
};

struct UserIdTag {};
struct NodeIdTag {};
struct SessionIdTag {};

using UserId = StrongId<UserIdTag>;
using NodeId = StrongId<NodeIdTag>;
using SessionId = StrongId<SessionIdTag>;

/// `<owner>/<slug>-<hex>`; the owner part is everything before the first '/'.
class IdentityId : public StrongId<struct IdentityIdTag> {
public:
    using StrongId::StrongId;

    UserId owner() const {
        const auto& s = str();
        auto slash = s.find('/');
        return UserId(slash == std::string::npos ? std::string() : s.substr(0, slash));
    }
};

}  // namespace clawnet

template <typename Tag>
struct std::hash<clawnet::StrongId<Tag>> {
    std::size_t operator()(const clawnet::StrongId<Tag>& id) const noexcept {
        return std::hash<std::string>{}(id.str());
    }
};

template <>
struct std::hash<clawnet::IdentityId> {
    std::size_t operator()(const clawnet::IdentityId& id) const noexcept {
        return std::hash<std::string>{}(id.str());
    }
};

#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/clock.hpp"
#include "clawnet/common/ids.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace clawnet::governance {

enum class ViolatedLayer { L1, L2, routing, session };

std::string_view to_string(ViolatedLayer l) noexcept;
std::optional<ViolatedLayer> parse_violated_layer(std::string_view text) noexcept;

struct EscalationEvent {
    std::string event_id;
    UserId owner;
    IdentityId identity;
    std::string action;
    std::vector<std::string> targets;
    std::optional<SessionId> session;
    ViolatedLayer layer = ViolatedLayer::L1;
    std::string reason;
    Millis timestamp = 0;
    bool acknowledged = false;

    Fields to_fields() const;
    static std::optional<EscalationEvent> from_fields(const Fields& f);
};

/// Per-owner security event feed. Events are never deleted, only
/// acknowledged. With a directory, events and acknowledgements are appended
/// to `<dir>/<owner>.events` and reloaded on construction.
class SecurityEventCenter {
public:
    explicit SecurityEventCenter(std::optional<std::filesystem::path> dir = std::nullopt);

    EscalationEvent push(EscalationEvent event);

    /// Idempotent; a second call returns the current state unchanged.
    /// Error(NotFound) if the owner has no such event.
    EscalationEvent acknowledge(const UserId& owner, const std::string& event_id);

    std::vector<EscalationEvent> feed(const UserId& owner) const;
    std::vector<EscalationEvent> all() const;
    std::size_t count(const UserId& owner, ViolatedLayer layer) const;

private:
    void persist(const UserId& owner, const Fields& line);

    mutable std::mutex mu_;
    std::optional<std::filesystem::path> dir_;
    std::map<UserId, std::vector<EscalationEvent>> feeds_;
    std::vector<std::pair<UserId, std::size_t>> order_;
};

}  // namespace clawnet::governance

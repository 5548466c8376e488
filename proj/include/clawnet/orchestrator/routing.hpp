#pragma once

#include "clawnet/common/ids.hpp"

#include <optional>
#include <string>

namespace clawnet::orchestrator {

/// `to` is an identity id or a manager address (`<owner>/@manager`).
struct Envelope {
    IdentityId from;
    std::string to;
    std::optional<SessionId> session;
    std::string body;
};

enum class DeliveryStatus { delivered, structurally_unroutable, not_in_session, unknown_destination };

std::string_view to_string(DeliveryStatus s) noexcept;

struct DeliveryResult {
    DeliveryStatus status = DeliveryStatus::unknown_destination;
    std::string detail;
    std::optional<std::string> escalation_id;

    bool delivered() const noexcept { return status == DeliveryStatus::delivered; }
};

}  // namespace clawnet::orchestrator

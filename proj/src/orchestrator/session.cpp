#include "clawnet/orchestrator/session.hpp"

#include "clawnet/orchestrator/routing.hpp"

#include <array>

namespace clawnet::orchestrator {

namespace {
constexpr std::array<std::string_view, 4> kStates = {"PendingInitiatorApproval", "PendingResponderApproval", "Active",
                                                     "Terminated"};
constexpr std::array<std::string_view, 10> kReasons = {
    "RejectedByInitiator", "RejectedByResponder", "ApprovalTimeout", "Completed",     "TurnLimit",
    "OwnerAbort",          "IdentityRetired",     "Fault",           "ContactRemoved", "PeerNotPermitted"};
}  // namespace

std::string_view to_string(SessionState s) noexcept { return kStates[static_cast<std::size_t>(s)]; }
std::string_view to_string(TerminationReason r) noexcept { return kReasons[static_cast<std::size_t>(r)]; }

std::optional<SessionState> parse_session_state(std::string_view text) noexcept {
    for (std::size_t i = 0; i < kStates.size(); ++i)
        if (kStates[i] == text) return static_cast<SessionState>(i);
    return std::nullopt;
}

std::optional<TerminationReason> parse_termination_reason(std::string_view text) noexcept {
    for (std::size_t i = 0; i < kReasons.size(); ++i)
        if (kReasons[i] == text) return static_cast<TerminationReason>(i);
    return std::nullopt;
}

std::string_view to_string(ApprovalRole r) noexcept {
    switch (r) {
    case ApprovalRole::initiator: return "initiator";
    case ApprovalRole::responder: return "responder";
    case ApprovalRole::action: return "action";
    }
    return "initiator";
}

std::string_view to_string(ApprovalState s) noexcept {
    switch (s) {
    case ApprovalState::pending: return "pending";
    case ApprovalState::approved: return "approved";
    case ApprovalState::rejected: return "rejected";
    case ApprovalState::expired: return "expired";
    }
    return "pending";
}

std::string_view to_string(DeliveryStatus s) noexcept {
    switch (s) {
    case DeliveryStatus::delivered: return "delivered";
    case DeliveryStatus::structurally_unroutable: return "StructurallyUnroutable";
    case DeliveryStatus::not_in_session: return "NotInSession";
    case DeliveryStatus::unknown_destination: return "UnknownDestination";
    }
    return "UnknownDestination";
}

}  // namespace clawnet::orchestrator

#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/ids.hpp"
#include "clawnet/runtime/turn.hpp"
#include "clawnet/wire/directive.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clawnet::orchestrator {

enum class SessionState { PendingInitiatorApproval, PendingResponderApproval, Active, Terminated };

enum class TerminationReason {
    RejectedByInitiator,
    RejectedByResponder,
    ApprovalTimeout,
    Completed,
    TurnLimit,
    OwnerAbort,
    IdentityRetired,
    Fault,
    ContactRemoved,
    PeerNotPermitted,
};

std::string_view to_string(SessionState s) noexcept;
std::string_view to_string(TerminationReason r) noexcept;
std::optional<SessionState> parse_session_state(std::string_view text) noexcept;
std::optional<TerminationReason> parse_termination_reason(std::string_view text) noexcept;

struct Party {
    UserId user;
    IdentityId identity;
};

/// A turn whose side effects are still in progress (waiting for an owner
/// decision or for child sessions).
struct PendingTurn {
    IdentityId speaker;
    runtime::PolicyTurn turn;
    std::string advice;
    std::optional<std::string> approval_request;
    std::string approval_outcome;
    bool directives_done = false;
    std::vector<wire::DirectiveResult> results;
    bool spawned = false;
    std::vector<SessionId> children;
    std::vector<std::string> child_errors;
};

struct CollaborationSession {
    SessionId id;
    Party initiator;
    Party responder;
    std::string intent;
    SessionState state = SessionState::PendingInitiatorApproval;
    std::optional<TerminationReason> reason;
    std::size_t turn_count = 0;
    std::size_t max_turns = 20;
    std::optional<SessionId> chain_parent;
    std::size_t depth = 0;
    std::vector<runtime::Turn> transcript;
    bool initiator_ended = false;
    bool responder_ended = false;
    bool abort_requested = false;
    std::optional<PendingTurn> pending;
    Millis created = 0;

    bool terminated() const noexcept { return state == SessionState::Terminated; }
    bool participant(const IdentityId& id) const { return id == initiator.identity || id == responder.identity; }
    bool owner_participant(const UserId& u) const { return u == initiator.user || u == responder.user; }
};

enum class ApprovalRole { initiator, responder, action };
enum class ApprovalState { pending, approved, rejected, expired };

std::string_view to_string(ApprovalRole r) noexcept;
std::string_view to_string(ApprovalState s) noexcept;

struct ApprovalRequest {
    std::string request_id;
    SessionId session;
    UserId approver;
    ApprovalRole role = ApprovalRole::initiator;
    std::string summary;
    ApprovalState state = ApprovalState::pending;
    Millis created = 0;
    Millis deadline = 0;
};

enum class Decision { approve, reject };

}  // namespace clawnet::orchestrator

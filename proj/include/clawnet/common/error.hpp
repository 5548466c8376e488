#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clawnet {

enum class Errc {
    InvalidArgument,
    UnknownUser,
    UnknownOwner,
    UnknownIdentity,
    ScopeExceedsResources,
    SelfInPeers,
    NotOwner,
    AlreadyRetired,
    IdentityRetired,
    PeerNotPermitted,
    NoConfirmedContact,
    NoContact,
    NoAssignedIdentity,
    DuplicateContact,
    DepthExceeded,
    UnknownSession,
    UnknownRequest,
    InvalidState,
    NotApprover,
    AlreadyResolved,
    Expired,
    SessionPaused,
    ParticipantRetired,
    PolicyFailure,
    StructurallyUnroutable,
    NotInSession,
    UnknownDestination,
    NodeUnavailable,
    Timeout,
    StorageFailure,
    ForeignNamespace,
    Retired,
    OwnerMismatch,
    DuplicateNode,
    NotFound,
    AlreadyExists,
    ExecFailure,
    ChainBroken,
    ConflictingLaterEdit,
    ProtocolError,
    ScenarioParseError,
    ExpectationFailed,
};

std::string_view to_string(Errc code) noexcept;
std::optional<Errc> parse_errc(std::string_view text) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace clawnet

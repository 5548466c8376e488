#include "clawnet/common/error.hpp"

namespace clawnet {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::UnknownUser: return "UnknownUser";
        case Errc::UnknownOwner: return "UnknownOwner";
        case Errc::UnknownIdentity: return "UnknownIdentity";
        case Errc::ScopeExceedsResources: return "ScopeExceedsResources";
        case Errc::SelfInPeers: return "SelfInPeers";
        case Errc::NotOwner: return "NotOwner";
        case Errc::AlreadyRetired: return "AlreadyRetired";
        case Errc::IdentityRetired: return "IdentityRetired";
        case Errc::PeerNotPermitted: return "PeerNotPermitted";
        case Errc::NoConfirmedContact: return "NoConfirmedContact";
        case Errc::NoContact: return "NoContact";
        case Errc::NoAssignedIdentity: return "NoAssignedIdentity";
        case Errc::DuplicateContact: return "DuplicateContact";
        case Errc::DepthExceeded: return "DepthExceeded";
        case Errc::UnknownSession: return "UnknownSession";
        case Errc::UnknownRequest: return "UnknownRequest";
        case Errc::InvalidState: return "InvalidState";
        case Errc::NotApprover: return "NotApprover";
        case Errc::AlreadyResolved: return "AlreadyResolved";
        case Errc::Expired: return "Expired";
        case Errc::SessionPaused: return "SessionPaused";
        case Errc::ParticipantRetired: return "ParticipantRetired";
        case Errc::PolicyFailure: return "PolicyFailure";
        case Errc::StructurallyUnroutable: return "StructurallyUnroutable";
        case Errc::NotInSession: return "NotInSession";
        case Errc::UnknownDestination: return "UnknownDestination";
        case Errc::NodeUnavailable: return "NodeUnavailable";
        case Errc::Timeout: return "Timeout";
        case Errc::StorageFailure: return "StorageFailure";
        case Errc::ForeignNamespace: return "ForeignNamespace";
        case Errc::Retired: return "Retired";
        case Errc::OwnerMismatch: return "OwnerMismatch";
        case Errc::DuplicateNode: return "DuplicateNode";
        case Errc::NotFound: return "NotFound";
        case Errc::AlreadyExists: return "AlreadyExists";
        case Errc::ExecFailure: return "ExecFailure";
        case Errc::ChainBroken: return "ChainBroken";
        case Errc::ConflictingLaterEdit: return "ConflictingLaterEdit";
        case Errc::ProtocolError: return "ProtocolError";
        case Errc::ScenarioParseError: return "ScenarioParseError";
        case Errc::ExpectationFailed: return "ExpectationFailed";
    }
    return "Unknown";
}

std::optional<Errc> parse_errc(std::string_view text) noexcept {
    for (int i = 0; i <= static_cast<int>(Errc::ExpectationFailed); ++i) {
        auto code = static_cast<Errc>(i);
        if (to_string(code) == text) return code;
    }
    return std::nullopt;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace clawnet

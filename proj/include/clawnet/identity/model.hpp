#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/ids.hpp"
#include "clawnet/identity/scope.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace clawnet::identity {

enum class IdentityStatus { active, retired };

/// The outward-facing projection of an owner: context tag, scope, memory
/// namespace and the set of peers allowed to address it.
struct IdentityAgent {
    IdentityId id;
    UserId owner;
    std::string context_tag;
    AuthorizationScope scope;
    std::string memory_ns;
    std::set<UserId> permitted_peers;
    IdentityStatus status = IdentityStatus::active;

    bool active() const noexcept { return status == IdentityStatus::active; }
    bool permits_peer(const UserId& u) const { return permitted_peers.count(u) != 0; }
};

enum class ContactState { pending_out, pending_in, confirmed };

std::string_view to_string(ContactState s) noexcept;

struct ContactRelationship {
    UserId peer;
    ContactState state = ContactState::pending_out;
    /// Which of the local user's identities this peer may address.
    std::optional<IdentityId> presented_identity;
};

struct User {
    UserId id;
    std::vector<std::string> resource_roots;
    std::optional<NodeId> registered_node;
    std::map<UserId, ContactRelationship> contacts;
};

/// The owner's isolated internal agent. It has no scope, no peers and no
/// external address; routing resolves it only for its own owner's agents.
struct ManagerAgent {
    UserId owner;

    std::string address() const { return owner.str() + "/@manager"; }
};

/// Manager addresses are `<owner>/@manager`.
bool is_manager_address(std::string_view address);

struct RetirementReceipt {
    IdentityId id;
    std::vector<SessionId> terminated_sessions;
    Millis retired_at = 0;
};

/// Lowercase, alphanumerics kept, everything else folded to single '-'.
std::string slugify(std::string_view tag);

}  // namespace clawnet::identity

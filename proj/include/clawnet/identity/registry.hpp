#pragma once

#include "clawnet/common/idgen.hpp"
#include "clawnet/identity/model.hpp"

#include <map>
#include <set>
#include <vector>

namespace clawnet::identity {

/// Store of users, identities and contacts. Every mutation validates the
/// model invariants first and leaves the store untouched when it throws.
/// Not synchronized; the orchestrator serializes access.
class Registry {
public:
    explicit Registry(IdGenerator& ids) : ids_(ids) {}

    const User& add_user(const UserId& id, std::vector<std::string> resource_roots);

    const IdentityAgent& create_identity(const UserId& owner, const std::string& context_tag,
                                         AuthorizationScope scope, std::set<UserId> permitted_peers);

    /// Marks retired; memory namespace and contact assignments are kept as
    /// archived references and rejected at use time.
    const IdentityAgent& retire_identity(const UserId& owner, const IdentityId& id);

    const IdentityAgent& update_scope(const UserId& owner, const IdentityId& id, AuthorizationScope scope);
    const IdentityAgent& update_peers(const UserId& owner, const IdentityId& id, std::set<UserId> peers);

    void request_contact(const UserId& from, const UserId& to);
    /// `by` accepts the pending request from `requester`; both records flip
    /// to confirmed together.
    void confirm_contact(const UserId& by, const UserId& requester);
    void remove_contact(const UserId& a, const UserId& b);

    const ContactRelationship& assign_contact_identity(const UserId& owner, const UserId& peer,
                                                       const IdentityId& identity);

    void set_registered_node(const UserId& owner, std::optional<NodeId> node);

    const User* find_user(const UserId& id) const;
    const IdentityAgent* find_identity(const IdentityId& id) const;
    const User& user(const UserId& id) const;
    const IdentityAgent& identity(const IdentityId& id) const;

    /// Confirmed on both records.
    bool contacts_confirmed(const UserId& a, const UserId& b) const;

    std::vector<const IdentityAgent*> identities_of(const UserId& owner) const;
    std::vector<UserId> users() const;

    /// Checks every stored invariant; used by property tests.
    bool invariants_hold() const;

private:
    void validate_identity(const User& owner, const AuthorizationScope& scope,
                           const std::set<UserId>& peers) const;
    IdentityAgent& mutable_identity(const UserId& owner, const IdentityId& id);

    IdGenerator& ids_;
    std::map<UserId, User> users_;
    std::map<IdentityId, IdentityAgent> identities_;
};

}  // namespace clawnet::identity

#include "clawnet/identity/registry.hpp"

#include "clawnet/common/error.hpp"
#include "clawnet/identity/path.hpp"

namespace clawnet::identity {

const User& Registry::add_user(const UserId& id, std::vector<std::string> resource_roots) {
    if (id.empty() || id.str().find('/') != std::string::npos || id.str().find('@') != std::string::npos)
        fail(Errc::InvalidArgument, "user id '" + id.str() + "' must be non-empty without '/' or '@'");
    if (users_.count(id)) fail(Errc::InvalidArgument, "user '" + id.str() + "' already exists");
    for (const auto& r : resource_roots)
        if (!is_normalized(r)) fail(Errc::InvalidArgument, "resource root '" + r + "' is not normalized");
    User u;
    u.id = id;
    u.resource_roots = std::move(resource_roots);
    return users_.emplace(id, std::move(u)).first->second;
}

void Registry::validate_identity(const User& owner, const AuthorizationScope& scope,
                                 const std::set<UserId>& peers) const {
    if (peers.count(owner.id)) fail(Errc::SelfInPeers, "owner '" + owner.id.str() + "' listed in its own peers");
    for (const auto& p : peers)
        if (!users_.count(p)) fail(Errc::UnknownUser, "peer '" + p.str() + "' is not a user");
    for (const auto& g : scope.grants())
        if (!is_normalized(g.prefix)) fail(Errc::InvalidArgument, "grant prefix '" + g.prefix + "' not normalized");
    if (!scope.within(owner.resource_roots))
        fail(Errc::ScopeExceedsResources, "scope '" + scope.to_string() + "' exceeds resources of '" +
                                              owner.id.str() + "'");
}

const IdentityAgent& Registry::create_identity(const UserId& owner, const std::string& context_tag,
                                               AuthorizationScope scope, std::set<UserId> permitted_peers) {
    auto uit = users_.find(owner);
    if (uit == users_.end()) fail(Errc::UnknownOwner, "no user '" + owner.str() + "'");
    if (context_tag.empty()) fail(Errc::InvalidArgument, "context tag must be non-empty");
    validate_identity(uit->second, scope, permitted_peers);

    std::string base = owner.str() + "/" + slugify(context_tag) + "-";
    IdentityId id;
    do {
        id = IdentityId(base + ids_.hex4());
    } while (identities_.count(id));

    IdentityAgent agent;
    agent.id = id;
    agent.owner = owner;
    agent.context_tag = context_tag;
    agent.scope = std::move(scope);
    agent.memory_ns = id.str();
    agent.permitted_peers = std::move(permitted_peers);
    return identities_.emplace(id, std::move(agent)).first->second;
}

IdentityAgent& Registry::mutable_identity(const UserId& owner, const IdentityId& id) {
    auto it = identities_.find(id);
    if (it == identities_.end()) fail(Errc::UnknownIdentity, "no identity '" + id.str() + "'");
    if (it->second.owner != owner)
        fail(Errc::NotOwner, "'" + owner.str() + "' does not own '" + id.str() + "'");
    return it->second;
}

const IdentityAgent& Registry::retire_identity(const UserId& owner, const IdentityId& id) {
    IdentityAgent& agent = mutable_identity(owner, id);
    if (!agent.active()) fail(Errc::AlreadyRetired, "'" + id.str() + "' already retired");
    agent.status = IdentityStatus::retired;
    return agent;
}

const IdentityAgent& Registry::update_scope(const UserId& owner, const IdentityId& id, AuthorizationScope scope) {
    IdentityAgent& agent = mutable_identity(owner, id);
    if (!agent.active()) fail(Errc::IdentityRetired, "'" + id.str() + "' is retired");
    validate_identity(user(owner), scope, agent.permitted_peers);
    agent.scope = std::move(scope);
    return agent;
}

const IdentityAgent& Registry::update_peers(const UserId& owner, const IdentityId& id, std::set<UserId> peers) {
    IdentityAgent& agent = mutable_identity(owner, id);
    if (!agent.active()) fail(Errc::IdentityRetired, "'" + id.str() + "' is retired");
    validate_identity(user(owner), agent.scope, peers);
    agent.permitted_peers = std::move(peers);
    return agent;
}

void Registry::request_contact(const UserId& from, const UserId& to) {
    auto fit = users_.find(from);
    auto tit = users_.find(to);
    if (fit == users_.end()) fail(Errc::UnknownUser, "no user '" + from.str() + "'");
    if (tit == users_.end()) fail(Errc::UnknownUser, "no user '" + to.str() + "'");
    if (from == to) fail(Errc::InvalidArgument, "cannot add self as contact");
    if (fit->second.contacts.count(to)) fail(Errc::DuplicateContact, from.str() + " -> " + to.str());
    fit->second.contacts[to] = ContactRelationship{to, ContactState::pending_out, std::nullopt};
    tit->second.contacts[from] = ContactRelationship{from, ContactState::pending_in, std::nullopt};
}

void Registry::confirm_contact(const UserId& by, const UserId& requester) {
    auto bit = users_.find(by);
    auto rit = users_.find(requester);
    if (bit == users_.end() || rit == users_.end()) fail(Errc::UnknownUser, "unknown contact party");
    auto mine = bit->second.contacts.find(requester);
    auto theirs = rit->second.contacts.find(by);
    if (mine == bit->second.contacts.end() || theirs == rit->second.contacts.end() ||
        mine->second.state != ContactState::pending_in || theirs->second.state != ContactState::pending_out)
        fail(Errc::NoContact, "no pending request from '" + requester.str() + "' to '" + by.str() + "'");
    mine->second.state = ContactState::confirmed;
    theirs->second.state = ContactState::confirmed;
}

void Registry::remove_contact(const UserId& a, const UserId& b) {
    auto ait = users_.find(a);
    auto bit = users_.find(b);
    if (ait == users_.end() || bit == users_.end()) fail(Errc::UnknownUser, "unknown contact party");
    if (!ait->second.contacts.count(b)) fail(Errc::NoContact, a.str() + " has no contact " + b.str());
    ait->second.contacts.erase(b);
    bit->second.contacts.erase(a);
}

const ContactRelationship& Registry::assign_contact_identity(const UserId& owner, const UserId& peer,
                                                             const IdentityId& identity_id) {
    auto uit = users_.find(owner);
    if (uit == users_.end()) fail(Errc::UnknownUser, "no user '" + owner.str() + "'");
    if (!contacts_confirmed(owner, peer))
        fail(Errc::NoConfirmedContact, owner.str() + " and " + peer.str() + " are not confirmed contacts");
    auto iit = identities_.find(identity_id);
    if (iit == identities_.end()) fail(Errc::UnknownIdentity, "no identity '" + identity_id.str() + "'");
    const IdentityAgent& agent = iit->second;
    if (agent.owner != owner) fail(Errc::NotOwner, "'" + owner.str() + "' does not own '" + identity_id.str() + "'");
    if (!agent.active()) fail(Errc::IdentityRetired, "'" + identity_id.str() + "' is retired");
    if (!agent.permits_peer(peer))
        fail(Errc::PeerNotPermitted, "'" + peer.str() + "' not in permitted peers of '" + identity_id.str() + "'");
    auto& rel = uit->second.contacts.at(peer);
    rel.presented_identity = identity_id;
    return rel;
}

void Registry::set_registered_node(const UserId& owner, std::optional<NodeId> node) {
    auto it = users_.find(owner);
    if (it == users_.end()) fail(Errc::UnknownUser, "no user '" + owner.str() + "'");
    it->second.registered_node = std::move(node);
}

const User* Registry::find_user(const UserId& id) const {
    auto it = users_.find(id);
    return it == users_.end() ? nullptr : &it->second;
}

const IdentityAgent* Registry::find_identity(const IdentityId& id) const {
    auto it = identities_.find(id);
    return it == identities_.end() ? nullptr : &it->second;
}

const User& Registry::user(const UserId& id) const {
    const User* u = find_user(id);
    if (!u) fail(Errc::UnknownUser, "no user '" + id.str() + "'");
    return *u;
}

const IdentityAgent& Registry::identity(const IdentityId& id) const {
    const IdentityAgent* a = find_identity(id);
    if (!a) fail(Errc::UnknownIdentity, "no identity '" + id.str() + "'");
    return *a;
}

bool Registry::contacts_confirmed(const UserId& a, const UserId& b) const {
    const User* ua = find_user(a);
    const User* ub = find_user(b);
    if (!ua || !ub) return false;
    auto ia = ua->contacts.find(b);
    auto ib = ub->contacts.find(a);
    return ia != ua->contacts.end() && ib != ub->contacts.end() &&
           ia->second.state == ContactState::confirmed && ib->second.state == ContactState::confirmed;
}

std::vector<const IdentityAgent*> Registry::identities_of(const UserId& owner) const {
    std::vector<const IdentityAgent*> out;
    for (const auto& [id, agent] : identities_)
        if (agent.owner == owner) out.push_back(&agent);
    return out;
}

std::vector<UserId> Registry::users() const {
    std::vector<UserId> out;
    for (const auto& [id, u] : users_) out.push_back(id);
    return out;
}

bool Registry::invariants_hold() const {
    for (const auto& [id, agent] : identities_) {
        auto uit = users_.find(agent.owner);
        if (uit == users_.end() || id.owner() != agent.owner) return false;
        if (agent.permitted_peers.count(agent.owner)) return false;
        for (const auto& g : agent.scope.grants())
            if (!is_normalized(g.prefix)) return false;
        if (!agent.scope.within(uit->second.resource_roots)) return false;
    }
    return true;
}

}  // namespace clawnet::identity

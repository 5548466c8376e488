#pragma once

#include "clawnet/governance/governance.hpp"
#include "clawnet/identity/model.hpp"
#include "clawnet/runtime/memory.hpp"
#include "clawnet/runtime/policy.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

namespace clawnet::runtime {

struct AdvisorQuery {
    IdentityId asking;
    std::string context_tag;
    std::string question;
};

struct AdvisorResponse {
    std::string advice;
    /// Namespaces the surfaced entries came from, sorted.
    std::vector<std::string> sources;
    std::vector<MemoryEntry> entries;
};

/// Lowercased alphanumeric runs.
std::set<std::string> tokens(std::string_view text);

/// The manager's retrieval rule: the lowercased question contains the
/// lowercased key, or the key shares a token with the question or the
/// asking identity's context tag.
bool advisor_relevant(const std::string& key, const std::string& question, const std::string& context_tag);

/// Per-owner gateway runtime: hosts the owner's identity agents and its
/// manager agent, their memory namespaces and their reasoning policies.
///
/// Principals for memory access are an identity id (its own namespace
/// only), the owner's user id or the manager address (any namespace of the
/// owner).
class AgentRuntime {
public:
    AgentRuntime(UserId owner, MemoryStore& store, governance::Governance& governance);

    const UserId& owner() const noexcept { return owner_; }
    identity::ManagerAgent manager() const { return identity::ManagerAgent{owner_}; }

    /// Adds or refreshes the hosted copy of an identity of this owner.
    /// Retired identities get their namespace archived.
    void host(const identity::IdentityAgent& agent);
    std::optional<identity::IdentityAgent> hosted(const IdentityId& id) const;

    void bind_policy(const IdentityId& id, std::shared_ptr<Policy> policy);
    std::shared_ptr<Policy> policy_of(const IdentityId& id) const;

    MemoryEntry remember(const std::string& principal, const IdentityId& target, MemoryLayer layer,
                         const std::string& key, const std::string& value);
    std::vector<MemoryEntry> recall(const std::string& principal, const IdentityId& target,
                                    std::optional<MemoryLayer> layer = std::nullopt,
                                    const std::string& key_prefix = {}) const;

    /// Internal consultation; the advice goes back to the asking identity
    /// only and the consultation is recorded in the owner's audit log.
    AdvisorResponse consult_manager(const AdvisorQuery& query);

    /// Error(PolicyFailure) for any policy error or a missing binding.
    PolicyTurn next_turn(const TurnContext& ctx);

private:
    enum class Access { self, owner };
    const identity::IdentityAgent& require_hosted(const IdentityId& id) const;
    Access check_access(const std::string& principal, const IdentityId& target) const;

    UserId owner_;
    MemoryStore& store_;
    governance::Governance& governance_;
    mutable std::mutex mu_;
    std::map<IdentityId, identity::IdentityAgent> identities_;
    std::map<IdentityId, std::shared_ptr<Policy>> policies_;
};

}  // namespace clawnet::runtime

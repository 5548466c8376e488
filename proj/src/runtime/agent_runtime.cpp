#include "clawnet/runtime/agent_runtime.hpp"

#include "clawnet/common/error.hpp"

#include <algorithm>
#include <cctype>

namespace clawnet::runtime {

std::set<std::string> tokens(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            out.insert(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(std::move(cur));
    return out;
}

namespace {
std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}
}  // namespace

bool advisor_relevant(const std::string& key, const std::string& question, const std::string& context_tag) {
    if (!key.empty() && lower(question).find(lower(key)) != std::string::npos) return true;
    auto q = tokens(question);
    auto c = tokens(context_tag);
    q.insert(c.begin(), c.end());
    for (const auto& t : tokens(key))
        if (q.count(t)) return true;
    return false;
}

AgentRuntime::AgentRuntime(UserId owner, MemoryStore& store, governance::Governance& governance)
    : owner_(std::move(owner)), store_(store), governance_(governance) {}

void AgentRuntime::host(const identity::IdentityAgent& agent) {
    if (agent.owner != owner_) fail(Errc::OwnerMismatch, agent.id.str() + " is not owned by " + owner_.str());
    {
        std::lock_guard lock(mu_);
        identities_[agent.id] = agent;
    }
    if (!agent.active()) store_.archive(agent.memory_ns);
}

std::optional<identity::IdentityAgent> AgentRuntime::hosted(const IdentityId& id) const {
    std::lock_guard lock(mu_);
    auto it = identities_.find(id);
    if (it == identities_.end()) return std::nullopt;
    return it->second;
}

void AgentRuntime::bind_policy(const IdentityId& id, std::shared_ptr<Policy> policy) {
    std::lock_guard lock(mu_);
    if (!identities_.count(id)) fail(Errc::UnknownIdentity, id.str() + " is not hosted here");
    policies_[id] = std::move(policy);
}

std::shared_ptr<Policy> AgentRuntime::policy_of(const IdentityId& id) const {
    std::lock_guard lock(mu_);
    auto it = policies_.find(id);
    return it == policies_.end() ? nullptr : it->second;
}

const identity::IdentityAgent& AgentRuntime::require_hosted(const IdentityId& id) const {
    auto it = identities_.find(id);
    if (it == identities_.end()) fail(Errc::UnknownIdentity, id.str() + " is not hosted by " + owner_.str());
    return it->second;
}

AgentRuntime::Access AgentRuntime::check_access(const std::string& principal, const IdentityId& target) const {
    if (principal == target.str()) return Access::self;
    if (target.owner() == owner_ && (principal == owner_.str() || principal == manager().address()))
        return Access::owner;
    fail(Errc::ForeignNamespace, principal + " may not access the namespace of " + target.str());
}

MemoryEntry AgentRuntime::remember(const std::string& principal, const IdentityId& target, MemoryLayer layer,
                                   const std::string& key, const std::string& value) {
    std::string ns;
    {
        std::lock_guard lock(mu_);
        check_access(principal, target);
        const auto& agent = require_hosted(target);
        if (!agent.active()) fail(Errc::Retired, target.str() + " is retired");
        ns = agent.memory_ns;
    }
    return store_.upsert(ns, layer, key, value);
}

std::vector<MemoryEntry> AgentRuntime::recall(const std::string& principal, const IdentityId& target,
                                              std::optional<MemoryLayer> layer,
                                              const std::string& key_prefix) const {
    std::string ns;
    {
        std::lock_guard lock(mu_);
        auto access = check_access(principal, target);
        const auto& agent = require_hosted(target);
        if (!agent.active() && access == Access::self) fail(Errc::Retired, target.str() + " is retired");
        ns = agent.memory_ns;
    }
    return store_.entries(ns, layer, key_prefix);
}

AdvisorResponse AgentRuntime::consult_manager(const AdvisorQuery& query) {
    if (query.asking.owner() != owner_)
        fail(Errc::StructurallyUnroutable, query.asking.str() + " cannot reach " + manager().address());
    std::vector<std::string> namespaces;
    {
        std::lock_guard lock(mu_);
        const auto& agent = require_hosted(query.asking);
        if (!agent.active()) fail(Errc::Retired, query.asking.str() + " is retired");
        for (const auto& [id, a] : identities_) namespaces.push_back(a.memory_ns);
    }
    AdvisorResponse resp;
    std::set<std::string> sources;
    for (const auto& ns : namespaces) {
        for (auto& e : store_.entries(ns)) {
            if (!advisor_relevant(e.key, query.question, query.context_tag)) continue;
            sources.insert(ns);
            resp.entries.push_back(std::move(e));
        }
    }
    resp.sources.assign(sources.begin(), sources.end());
    if (resp.entries.empty()) {
        resp.advice = "no relevant memory";
    } else {
        for (const auto& e : resp.entries) {
            if (!resp.advice.empty()) resp.advice += "; ";
            resp.advice += e.key + "=" + e.value;
        }
    }

    governance::AuditEntry entry;
    entry.action = "manager.consult";
    entry.owner = owner_;
    entry.identity = query.asking;
    entry.result = governance::AuditResult::allowed_executed;
    entry.ext.emplace_back("question", query.question);
    std::string src;
    for (const auto& s : resp.sources) src += (src.empty() ? "" : ",") + s;
    entry.ext.emplace_back("sources", src);
    entry.ext.emplace_back("advice", resp.advice);
    governance_.record(std::move(entry));
    return resp;
}

PolicyTurn AgentRuntime::next_turn(const TurnContext& ctx) {
    std::shared_ptr<Policy> policy;
    {
        std::lock_guard lock(mu_);
        const auto& agent = require_hosted(ctx.self);
        if (!agent.active()) fail(Errc::ParticipantRetired, ctx.self.str() + " is retired");
        auto it = policies_.find(ctx.self);
        if (it == policies_.end()) fail(Errc::PolicyFailure, "no policy bound to " + ctx.self.str());
        policy = it->second;
    }
    try {
        return policy->next(ctx);
    } catch (const Error& e) {
        if (e.code() == Errc::PolicyFailure) throw;
        fail(Errc::PolicyFailure, e.what());
    } catch (const std::exception& e) {
        fail(Errc::PolicyFailure, e.what());
    }
}

}  // namespace clawnet::runtime

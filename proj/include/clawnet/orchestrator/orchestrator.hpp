#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/idgen.hpp"
#include "clawnet/common/trace_sink.hpp"
#include "clawnet/governance/governance.hpp"
#include "clawnet/identity/registry.hpp"
#include "clawnet/orchestrator/node_link.hpp"
#include "clawnet/orchestrator/routing.hpp"
#include "clawnet/orchestrator/session.hpp"
#include "clawnet/runtime/agent_runtime.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>

namespace clawnet::orchestrator {

struct Settings {
    std::size_t d_max = 3;
    std::size_t max_turns = 20;
    /// Approval deadline in clock milliseconds (24 h by default).
    Millis approval_deadline = 24LL * 3600 * 1000;
    std::chrono::milliseconds node_timeout{5000};
    /// Directory for audit logs, events and memory; in-memory when unset.
    std::optional<std::filesystem::path> state_dir;
    bool durable = true;
};

enum class StepOutcome { advanced, waiting, terminated, idle };

struct NodeRegistration {
    NodeId node;
    UserId owner;
    std::vector<std::string> capabilities;
};

/// Central server state: users, identities and contacts, collaboration
/// sessions and their approvals, identity-based routing, the L1 checkpoint
/// on the directive path and the registered node endpoints.
///
/// Thread-safe. Trace events are emitted while internal locks are held, so
/// sinks must not call back into the orchestrator.
class Orchestrator {
public:
    Orchestrator(const Clock& clock, IdGenerator& ids, EventSink& sink, Settings settings = {});
    ~Orchestrator();

    const Settings& settings() const noexcept { return settings_; }

    // -- users, identities, contacts ---------------------------------------

    void add_user(const UserId& user, std::vector<std::string> resource_roots);
    identity::IdentityAgent create_identity(const UserId& owner, const std::string& context_tag,
                                            identity::AuthorizationScope scope, std::set<UserId> peers);
    identity::RetirementReceipt retire_identity(const UserId& owner, const IdentityId& id);
    identity::IdentityAgent update_scope(const UserId& owner, const IdentityId& id, identity::AuthorizationScope scope);
    identity::IdentityAgent update_peers(const UserId& owner, const IdentityId& id, std::set<UserId> peers);
    void request_contact(const UserId& from, const UserId& to);
    void confirm_contact(const UserId& by, const UserId& requester);
    void remove_contact(const UserId& a, const UserId& b);
    identity::ContactRelationship assign_contact_identity(const UserId& owner, const UserId& peer,
                                                          const IdentityId& id);

    std::optional<identity::IdentityAgent> find_identity(const IdentityId& id) const;
    std::vector<identity::IdentityAgent> identities_of(const UserId& owner) const;
    std::optional<identity::User> find_user(const UserId& id) const;
    std::vector<UserId> users() const;
    bool registry_invariants_hold() const;

    runtime::AgentRuntime& runtime(const UserId& owner);
    void bind_policy(const IdentityId& id, std::shared_ptr<runtime::Policy> policy);

    // -- sessions ------------------------------------------------------------

    SessionId request_collaboration(const IdentityId& initiator, const UserId& responder, const std::string& intent,
                                    std::optional<SessionId> chain_parent = std::nullopt);
    /// `by` must be the request's approver.
    SessionState resolve_approval(const std::string& request_id, const UserId& by, Decision decision);
    /// Pending requests for `approver` (all owners when empty), oldest first.
    std::vector<ApprovalRequest> pending_approvals(const std::optional<UserId>& approver = std::nullopt) const;
    std::optional<ApprovalRequest> approval(const std::string& request_id) const;
    /// Expires every request past its deadline; returns how many.
    std::size_t expire_approvals();

    /// Owner-layer termination. Takes effect before the next turn is
    /// delivered; child sessions are aborted with it.
    void abort_session(const UserId& owner, const SessionId& id);

    /// One dialogue step: a turn, or progress on a turn that is waiting.
    StepOutcome step_session(const SessionId& id);
    /// One step for every Active session, in id order. Returns how many
    /// advanced or terminated.
    std::size_t step_all();
    /// Steps until the session terminates or can make no progress on its own.
    std::optional<TerminationReason> run_dialogue(const SessionId& id,
                                                  const std::function<void(const runtime::Turn&)>& on_turn = {});

    std::optional<CollaborationSession> session(const SessionId& id) const;
    std::vector<CollaborationSession> sessions() const;

    // -- routing and directives ------------------------------------------------

    DeliveryResult route(const Envelope& envelope);
    /// Manager-bound envelopes actually delivered, per manager owner.
    std::size_t manager_deliveries(const UserId& owner) const;
    std::size_t total_manager_deliveries() const;
    /// Envelopes delivered to any runtime of `owner`.
    std::size_t deliveries_to(const UserId& owner) const;
    /// Times the policy of an identity of `owner` was asked for a turn.
    std::size_t policy_invocations(const UserId& owner) const;

    /// L1, forward to the issuer owner's node, audit the final result.
    wire::DirectiveResult proxy_directive(const governance::Operation& op, const std::string& content = {});

    /// Test hook: skip L1 (every directive is treated as allowed).
    void force_l1_open(bool open) { l1_forced_open_ = open; }

    // -- nodes -----------------------------------------------------------------

    /// Registers from a REGISTER_NODE frame. Error(UnknownUser),
    /// Error(OwnerMismatch) if the node id belongs to another owner,
    /// Error(DuplicateNode) if the owner already has a different node.
    NodeRegistration register_node(const wire::Frame& frame, std::shared_ptr<NodeConnection> connection);
    void unregister_node(const NodeId& node);
    std::optional<NodeId> node_of(const UserId& owner) const;

    /// Forwards undo/rollback to the owner's node.
    wire::DirectiveResult node_undo(const UserId& owner, std::size_t count);
    wire::DirectiveResult node_rollback(const UserId& owner, std::uint64_t to_seq);

    governance::Governance& governance() noexcept { return *governance_; }
    runtime::MemoryStore& memory() noexcept { return *memory_; }

private:
    struct SessionSlot;

    void emit(TraceEvent ev);
    void audit_owner(const UserId& owner, const IdentityId& identity, std::string action,
                     std::optional<SessionId> session, Fields ext = {},
                     governance::AuditResult result = governance::AuditResult::allowed_executed);
    void emit_state(const CollaborationSession& s);
    void emit_frame(const wire::Frame& f, const std::string& src, const std::string& dst);
    std::string new_approval(CollaborationSession& s, const UserId& approver, ApprovalRole role,
                             const std::string& summary);
    void terminate_locked(CollaborationSession& s, TerminationReason reason, const std::string& detail = {});
    runtime::AgentRuntime& runtime_locked(const UserId& owner);
    SessionId request_locked(const IdentityId& initiator, const UserId& responder, const std::string& intent,
                             std::optional<SessionId> chain_parent);
    CollaborationSession& session_locked(const SessionId& id);
    DeliveryResult route_locked(const Envelope& envelope);
    StepOutcome step_locked(std::unique_lock<std::mutex>& lock, SessionSlot& slot);
    StepOutcome continue_turn(std::unique_lock<std::mutex>& lock, SessionSlot& slot);
    std::string expand(const CollaborationSession& s, const PendingTurn& p, const std::string& text) const;
    std::string child_results(const PendingTurn& p) const;
    wire::DirectiveResult node_control(const UserId& owner, const std::string& control, const std::string& key,
                                       const std::string& value);

    const Clock& clock_;
    IdGenerator& ids_;
    EventSink& sink_;
    Settings settings_;
    std::unique_ptr<governance::Governance> governance_;
    std::unique_ptr<runtime::MemoryStore> memory_;

    mutable std::mutex mu_;
    identity::Registry registry_;
    std::map<UserId, std::unique_ptr<runtime::AgentRuntime>> runtimes_;
    std::map<SessionId, std::unique_ptr<SessionSlot>> sessions_;
    std::map<std::string, ApprovalRequest> approvals_;
    std::vector<std::string> approval_order_;
    std::map<UserId, std::shared_ptr<NodeConnection>> node_links_;
    std::map<NodeId, UserId> node_owner_;
    std::map<UserId, std::size_t> manager_deliveries_;
    std::map<UserId, std::size_t> deliveries_;
    std::map<UserId, std::size_t> policy_calls_;
    std::atomic<bool> l1_forced_open_{false};
};

}  // namespace clawnet::orchestrator

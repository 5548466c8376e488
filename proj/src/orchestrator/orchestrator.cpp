#include "clawnet/orchestrator/orchestrator.hpp"

#include "clawnet/common/digest.hpp"
#include "clawnet/common/error.hpp"
#include "clawnet/governance/authorize.hpp"

#include <algorithm>

namespace clawnet::orchestrator {

using governance::AuditEntry;
using governance::AuditResult;
using governance::ViolatedLayer;

struct Orchestrator::SessionSlot {
    CollaborationSession s;
    std::mutex step_mu;
    bool stepping = false;
};

namespace {

IdentityId owner_principal(const UserId& owner) { return IdentityId(owner.str() + "/@owner"); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

}  // namespace

Orchestrator::Orchestrator(const Clock& clock, IdGenerator& ids, EventSink& sink, Settings settings)
    : clock_(clock), ids_(ids), sink_(sink), settings_(std::move(settings)), registry_(ids) {
    governance_ = std::make_unique<governance::Governance>(clock_, ids_, sink_, settings_.state_dir, settings_.durable);
    std::optional<std::filesystem::path> mem_dir;
    if (settings_.state_dir) mem_dir = *settings_.state_dir / "memory";
    memory_ = std::make_unique<runtime::MemoryStore>(clock_, mem_dir, settings_.durable);
}

Orchestrator::~Orchestrator() = default;

void Orchestrator::emit(TraceEvent ev) { sink_.emit(std::move(ev)); }

void Orchestrator::audit_owner(const UserId& owner, const IdentityId& identity, std::string action,
                               std::optional<SessionId> session, Fields ext, AuditResult result) {
    AuditEntry e;
    e.action = std::move(action);
    e.owner = owner;
    e.identity = identity;
    e.session = std::move(session);
    e.result = result;
    e.ext = std::move(ext);
    governance_->record(std::move(e));
}

void Orchestrator::emit_state(const CollaborationSession& s) {
    Fields f{{"session", s.id.str()},
             {"state", std::string(to_string(s.state))},
             {"initiator", s.initiator.identity.str()},
             {"responder", s.responder.identity.str()},
             {"depth", std::to_string(s.depth)}};
    if (s.chain_parent) f.emplace_back("parent", s.chain_parent->str());
    if (s.reason) f.emplace_back("reason", std::string(to_string(*s.reason)));
    f.emplace_back("turns", std::to_string(s.turn_count));
    emit({"session", s.id.str(), std::move(f)});
}

void Orchestrator::emit_frame(const wire::Frame& fr, const std::string& src, const std::string& dst) {
    Fields f{{"frame", std::string(wire::to_string(fr.kind))}, {"src", src}, {"dst", dst}, {"msg", fr.msg_id}};
    if (fr.session) f.emplace_back("session", fr.session->str());
    f.emplace_back("issuer", fr.issuer);
    for (const auto& kv : fr.body) f.emplace_back("b." + kv.first, kv.second);
    emit({"frame", fr.session ? fr.session->str() : "-", std::move(f)});
}

// -- users, identities, contacts ------------------------------------------------

runtime::AgentRuntime& Orchestrator::runtime_locked(const UserId& owner) {
    auto it = runtimes_.find(owner);
    if (it == runtimes_.end()) fail(Errc::UnknownUser, "no runtime for " + owner.str());
    return *it->second;
}

runtime::AgentRuntime& Orchestrator::runtime(const UserId& owner) {
    std::lock_guard lock(mu_);
    return runtime_locked(owner);
}

void Orchestrator::add_user(const UserId& user, std::vector<std::string> resource_roots) {
    std::lock_guard lock(mu_);
    registry_.add_user(user, std::move(resource_roots));
    runtimes_[user] = std::make_unique<runtime::AgentRuntime>(user, *memory_, *governance_);
    audit_owner(user, owner_principal(user), "user.add", std::nullopt);
}

identity::IdentityAgent Orchestrator::create_identity(const UserId& owner, const std::string& context_tag,
                                                      identity::AuthorizationScope scope, std::set<UserId> peers) {
    std::lock_guard lock(mu_);
    identity::IdentityAgent agent = registry_.create_identity(owner, context_tag, std::move(scope), std::move(peers));
    runtime_locked(owner).host(agent);
    std::vector<std::string> ps;
    for (const auto& p : agent.permitted_peers) ps.push_back(p.str());
    audit_owner(owner, agent.id, "identity.create", std::nullopt,
                {{"tag", agent.context_tag}, {"scope", agent.scope.to_string()}, {"peers", join(ps, ",")}});
    return agent;
}

identity::RetirementReceipt Orchestrator::retire_identity(const UserId& owner, const IdentityId& id) {
    std::lock_guard lock(mu_);
    identity::IdentityAgent agent = registry_.retire_identity(owner, id);
    runtime_locked(owner).host(agent);
    identity::RetirementReceipt receipt;
    receipt.id = id;
    receipt.retired_at = clock_.now_ms();
    for (auto& [sid, slot] : sessions_) {
        auto& s = slot->s;
        if (s.terminated() || !s.participant(id)) continue;
        terminate_locked(s, TerminationReason::IdentityRetired, id.str() + " retired");
        receipt.terminated_sessions.push_back(sid);
    }
    audit_owner(owner, id, "identity.retire", std::nullopt,
                {{"terminated", std::to_string(receipt.terminated_sessions.size())}});
    return receipt;
}

identity::IdentityAgent Orchestrator::update_scope(const UserId& owner, const IdentityId& id,
                                                   identity::AuthorizationScope scope) {
    std::lock_guard lock(mu_);
    identity::IdentityAgent agent = registry_.update_scope(owner, id, std::move(scope));
    runtime_locked(owner).host(agent);
    audit_owner(owner, id, "identity.scope", std::nullopt, {{"scope", agent.scope.to_string()}});
    return agent;
}

identity::IdentityAgent Orchestrator::update_peers(const UserId& owner, const IdentityId& id, std::set<UserId> peers) {
    std::lock_guard lock(mu_);
    identity::IdentityAgent agent = registry_.update_peers(owner, id, std::move(peers));
    runtime_locked(owner).host(agent);
    std::vector<std::string> ps;
    for (const auto& p : agent.permitted_peers) ps.push_back(p.str());
    audit_owner(owner, id, "identity.peers", std::nullopt, {{"peers", join(ps, ",")}});
    return agent;
}

void Orchestrator::request_contact(const UserId& from, const UserId& to) {
    std::lock_guard lock(mu_);
    registry_.request_contact(from, to);
    audit_owner(from, owner_principal(from), "contact.request", std::nullopt, {{"peer", to.str()}});
}

void Orchestrator::confirm_contact(const UserId& by, const UserId& requester) {
    std::lock_guard lock(mu_);
    registry_.confirm_contact(by, requester);
    audit_owner(by, owner_principal(by), "contact.confirm", std::nullopt, {{"peer", requester.str()}});
}

void Orchestrator::remove_contact(const UserId& a, const UserId& b) {
    std::lock_guard lock(mu_);
    registry_.remove_contact(a, b);
    audit_owner(a, owner_principal(a), "contact.remove", std::nullopt, {{"peer", b.str()}});
}

identity::ContactRelationship Orchestrator::assign_contact_identity(const UserId& owner, const UserId& peer,
                                                                    const IdentityId& id) {
    std::lock_guard lock(mu_);
    auto rel = registry_.assign_contact_identity(owner, peer, id);
    audit_owner(owner, id, "contact.assign", std::nullopt, {{"peer", peer.str()}});
    return rel;
}

std::optional<identity::IdentityAgent> Orchestrator::find_identity(const IdentityId& id) const {
    std::lock_guard lock(mu_);
    const auto* a = registry_.find_identity(id);
    if (!a) return std::nullopt;
    return *a;
}

std::vector<identity::IdentityAgent> Orchestrator::identities_of(const UserId& owner) const {
    std::lock_guard lock(mu_);
    std::vector<identity::IdentityAgent> out;
    for (const auto* a : registry_.identities_of(owner)) out.push_back(*a);
    return out;
}

std::optional<identity::User> Orchestrator::find_user(const UserId& id) const {
    std::lock_guard lock(mu_);
    const auto* u = registry_.find_user(id);
    if (!u) return std::nullopt;
    return *u;
}

std::vector<UserId> Orchestrator::users() const {
    std::lock_guard lock(mu_);
    return registry_.users();
}

bool Orchestrator::registry_invariants_hold() const {
    std::lock_guard lock(mu_);
    return registry_.invariants_hold();
}

void Orchestrator::bind_policy(const IdentityId& id, std::shared_ptr<runtime::Policy> policy) {
    std::lock_guard lock(mu_);
    runtime_locked(id.owner()).bind_policy(id, std::move(policy));
}

// -- sessions ---------------------------------------------------------------------

CollaborationSession& Orchestrator::session_locked(const SessionId& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(Errc::UnknownSession, "no session " + id.str());
    return it->second->s;
}

std::string Orchestrator::new_approval(CollaborationSession& s, const UserId& approver, ApprovalRole role,
                                       const std::string& summary) {
    ApprovalRequest req;
    req.request_id = ids_.next("apr");
    req.session = s.id;
    req.approver = approver;
    req.role = role;
    req.summary = summary;
    req.created = clock_.now_ms();
    req.deadline = req.created + settings_.approval_deadline;
    approvals_[req.request_id] = req;
    approval_order_.push_back(req.request_id);

    wire::Frame f;
    f.kind = wire::FrameKind::APPROVAL_EVENT;
    f.msg_id = ids_.next("msg");
    f.session = s.id;
    f.issuer = "orchestrator";
    f.set("request", req.request_id)
        .set("role", std::string(to_string(role)))
        .set("state", "pending")
        .set("summary", summary)
        .set("deadline", format_utc(req.deadline));
    emit_frame(f, "orchestrator", approver.str());
    return req.request_id;
}

void Orchestrator::terminate_locked(CollaborationSession& s, TerminationReason reason, const std::string& detail) {
    if (s.terminated()) return;
    s.state = SessionState::Terminated;
    s.reason = reason;
    s.pending.reset();
    Fields ext{{"reason", std::string(to_string(reason))}, {"turns", std::to_string(s.turn_count)}};
    if (!detail.empty()) ext.emplace_back("detail", detail);
    audit_owner(s.initiator.user, s.initiator.identity, "session.terminate", s.id, ext);
    audit_owner(s.responder.user, s.responder.identity, "session.terminate", s.id, ext);
    emit_state(s);
    if (reason == TerminationReason::OwnerAbort) {
        for (auto& [cid, slot] : sessions_)
            if (slot->s.chain_parent == s.id && !slot->s.terminated())
                terminate_locked(slot->s, reason, "parent " + s.id.str() + " aborted");
    }
}

SessionId Orchestrator::request_collaboration(const IdentityId& initiator, const UserId& responder,
                                              const std::string& intent, std::optional<SessionId> chain_parent) {
    std::lock_guard lock(mu_);
    return request_locked(initiator, responder, intent, std::move(chain_parent));
}

SessionId Orchestrator::request_locked(const IdentityId& initiator, const UserId& responder, const std::string& intent,
                                       std::optional<SessionId> chain_parent) {
    const auto* ia = registry_.find_identity(initiator);
    if (!ia) fail(Errc::UnknownIdentity, "no identity " + initiator.str());
    if (!ia->active()) fail(Errc::IdentityRetired, initiator.str() + " is retired");
    const UserId u = ia->owner;
    const auto* vu = registry_.find_user(responder);
    if (!vu) fail(Errc::UnknownUser, "no user " + responder.str());
    if (responder == u) fail(Errc::InvalidArgument, "collaboration needs two different owners");
    if (!registry_.contacts_confirmed(u, responder))
        fail(Errc::NoContact, u.str() + " and " + responder.str() + " are not confirmed contacts");
    auto rel = vu->contacts.find(u);
    if (rel == vu->contacts.end() || !rel->second.presented_identity)
        fail(Errc::NoAssignedIdentity, responder.str() + " has not assigned an identity toward " + u.str());
    const auto* ja = registry_.find_identity(*rel->second.presented_identity);
    if (!ja || !ja->active()) fail(Errc::IdentityRetired, "identity presented by " + responder.str() + " is retired");

    const bool u_in_pj = ja->permits_peer(u);
    const bool v_in_pi = ia->permits_peer(responder);
    if (!u_in_pj || !v_in_pi) {
        AuditEntry attempted;
        attempted.action = "session.request";
        attempted.targets = {ja->id.str()};
        attempted.owner = u;
        attempted.identity = initiator;
        std::string reason = std::string("peer_not_permitted u_in_pj=") + (u_in_pj ? "1" : "0") +
                             " v_in_pi=" + (v_in_pi ? "1" : "0");
        governance_->escalate(attempted, ViolatedLayer::session, reason);
        fail(Errc::PeerNotPermitted, reason);
    }

    std::size_t depth = 0;
    if (chain_parent) {
        const auto& parent = session_locked(*chain_parent);
        if (parent.state != SessionState::Active)
            fail(Errc::InvalidState, "parent session " + chain_parent->str() + " is not active");
        if (!parent.owner_participant(u))
            fail(Errc::NotInSession, u.str() + " does not take part in " + chain_parent->str());
        depth = parent.depth + 1;
        if (depth >= settings_.d_max)
            fail(Errc::DepthExceeded, "chain depth " + std::to_string(depth) + " reaches d_max " +
                                          std::to_string(settings_.d_max));
    }

    auto slot = std::make_unique<SessionSlot>();
    auto& s = slot->s;
    s.id = SessionId(ids_.next("ses"));
    s.initiator = {u, initiator};
    s.responder = {responder, ja->id};
    s.intent = intent;
    s.max_turns = settings_.max_turns;
    s.chain_parent = chain_parent;
    s.depth = depth;
    s.created = clock_.now_ms();
    const SessionId sid = s.id;
    Fields ext{{"responder", ja->id.str()}, {"depth", std::to_string(depth)}, {"intent", intent}};
    if (chain_parent) ext.emplace_back("parent", chain_parent->str());
    audit_owner(u, initiator, "session.request", sid, ext);
    emit_state(s);
    new_approval(s, u, ApprovalRole::initiator, initiator.str() + " requests collaboration with " + ja->id.str() +
                                                    ": " + intent);
    sessions_.emplace(sid, std::move(slot));
    return sid;
}

SessionState Orchestrator::resolve_approval(const std::string& request_id, const UserId& by, Decision decision) {
    std::lock_guard lock(mu_);
    auto it = approvals_.find(request_id);
    if (it == approvals_.end()) fail(Errc::UnknownRequest, "no approval request " + request_id);
    auto& req = it->second;
    if (req.approver != by) fail(Errc::NotApprover, by.str() + " cannot resolve " + request_id);
    if (req.state != ApprovalState::pending) fail(Errc::AlreadyResolved, request_id + " is already resolved");
    auto& s = session_locked(req.session);
    if (s.terminated()) fail(Errc::InvalidState, "session " + s.id.str() + " has terminated");
    if (clock_.now_ms() >= req.deadline) {
        req.state = ApprovalState::expired;
        terminate_locked(s, TerminationReason::ApprovalTimeout, request_id + " expired");
        fail(Errc::Expired, request_id + " passed its deadline");
    }
    const bool approve = decision == Decision::approve;
    req.state = approve ? ApprovalState::approved : ApprovalState::rejected;
    const Party& party = req.approver == s.initiator.user ? s.initiator : s.responder;
    audit_owner(by, party.identity, approve ? "session.approve" : "session.reject", s.id,
                {{"request", request_id}, {"role", std::string(to_string(req.role))}});

    wire::Frame f;
    f.kind = wire::FrameKind::APPROVAL_EVENT;
    f.msg_id = ids_.next("msg");
    f.session = s.id;
    f.issuer = by.str();
    f.set("request", request_id).set("role", std::string(to_string(req.role))).set("state", std::string(to_string(req.state)));
    emit_frame(f, by.str(), "orchestrator");

    switch (req.role) {
    case ApprovalRole::initiator:
        if (!approve) {
            terminate_locked(s, TerminationReason::RejectedByInitiator);
            break;
        }
        s.state = SessionState::PendingResponderApproval;
        emit_state(s);
        new_approval(s, s.responder.user, ApprovalRole::responder,
                     s.initiator.identity.str() + " (" + s.initiator.user.str() + ") asks " +
                         s.responder.identity.str() + " to collaborate: " + s.intent);
        break;
    case ApprovalRole::responder:
        if (!approve) {
            terminate_locked(s, TerminationReason::RejectedByResponder);
            break;
        }
        s.state = SessionState::Active;
        emit_state(s);
        break;
    case ApprovalRole::action:
        break;
    }
    return s.state;
}

std::vector<ApprovalRequest> Orchestrator::pending_approvals(const std::optional<UserId>& approver) const {
    std::lock_guard lock(mu_);
    std::vector<ApprovalRequest> out;
    for (const auto& id : approval_order_) {
        const auto& req = approvals_.at(id);
        if (req.state != ApprovalState::pending) continue;
        if (approver && req.approver != *approver) continue;
        if (sessions_.at(req.session)->s.terminated()) continue;
        out.push_back(req);
    }
    return out;
}

std::optional<ApprovalRequest> Orchestrator::approval(const std::string& request_id) const {
    std::lock_guard lock(mu_);
    auto it = approvals_.find(request_id);
    if (it == approvals_.end()) return std::nullopt;
    return it->second;
}

std::size_t Orchestrator::expire_approvals() {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    const auto now = clock_.now_ms();
    for (const auto& id : approval_order_) {
        auto& req = approvals_.at(id);
        if (req.state != ApprovalState::pending || now < req.deadline) continue;
        auto& s = sessions_.at(req.session)->s;
        if (s.terminated()) continue;
        req.state = ApprovalState::expired;
        ++n;
        wire::Frame f;
        f.kind = wire::FrameKind::APPROVAL_EVENT;
        f.msg_id = ids_.next("msg");
        f.session = s.id;
        f.issuer = "orchestrator";
        f.set("request", id).set("role", std::string(to_string(req.role))).set("state", "expired");
        emit_frame(f, "orchestrator", req.approver.str());
        terminate_locked(s, TerminationReason::ApprovalTimeout, id + " expired");
    }
    return n;
}

void Orchestrator::abort_session(const UserId& owner, const SessionId& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(Errc::UnknownSession, "no session " + id.str());
    auto& slot = *it->second;
    auto& s = slot.s;
    if (!s.owner_participant(owner)) fail(Errc::NotOwner, owner.str() + " is not a party to " + id.str());
    if (s.terminated()) return;
    audit_owner(owner, owner_principal(owner), "session.abort", id);
    wire::Frame f;
    f.kind = wire::FrameKind::ABORT;
    f.msg_id = ids_.next("msg");
    f.session = id;
    f.issuer = owner.str();
    emit_frame(f, owner.str(), "orchestrator");
    s.abort_requested = true;
    if (!slot.stepping) terminate_locked(s, TerminationReason::OwnerAbort, "aborted by " + owner.str());
}

StepOutcome Orchestrator::step_session(const SessionId& id) {
    SessionSlot* slot = nullptr;
    {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) fail(Errc::UnknownSession, "no session " + id.str());
        slot = it->second.get();
    }
    std::lock_guard step(slot->step_mu);
    std::unique_lock lock(mu_);
    return step_locked(lock, *slot);
}

std::size_t Orchestrator::step_all() {
    std::vector<SessionId> ids;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, slot] : sessions_)
            if (slot->s.state == SessionState::Active) ids.push_back(id);
    }
    std::size_t n = 0;
    for (const auto& id : ids) {
        auto out = step_session(id);
        if (out == StepOutcome::advanced || out == StepOutcome::terminated) ++n;
    }
    return n;
}

std::optional<TerminationReason> Orchestrator::run_dialogue(const SessionId& id,
                                                            const std::function<void(const runtime::Turn&)>& on_turn) {
    for (;;) {
        auto before = session(id);
        if (!before) fail(Errc::UnknownSession, "no session " + id.str());
        if (before->terminated()) return before->reason;
        if (before->state != SessionState::Active) fail(Errc::InvalidState, id.str() + " is not active");
        auto out = step_session(id);
        auto after = session(id);
        if (on_turn && after->transcript.size() > before->transcript.size()) on_turn(after->transcript.back());
        if (out == StepOutcome::terminated) return after->reason;
        if (out == StepOutcome::waiting || out == StepOutcome::idle) return std::nullopt;
    }
}

std::optional<CollaborationSession> Orchestrator::session(const SessionId& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second->s;
}

std::vector<CollaborationSession> Orchestrator::sessions() const {
    std::lock_guard lock(mu_);
    std::vector<CollaborationSession> out;
    for (const auto& [id, slot] : sessions_) out.push_back(slot->s);
    return out;
}

StepOutcome Orchestrator::step_locked(std::unique_lock<std::mutex>& lock, SessionSlot& slot) {
    auto& s = slot.s;
    if (s.terminated()) return StepOutcome::terminated;
    if (s.state != SessionState::Active) return StepOutcome::idle;
    if (s.abort_requested) {
        terminate_locked(s, TerminationReason::OwnerAbort);
        return StepOutcome::terminated;
    }
    if (s.pending) return continue_turn(lock, slot);
    if (s.turn_count >= s.max_turns) {
        terminate_locked(s, TerminationReason::TurnLimit);
        return StepOutcome::terminated;
    }

    const bool initiator_turn = s.turn_count % 2 == 0;
    const Party speaker = initiator_turn ? s.initiator : s.responder;
    const Party counterpart = initiator_turn ? s.responder : s.initiator;
    if (initiator_turn ? s.initiator_ended : s.responder_ended) {
        terminate_locked(s, TerminationReason::Completed);
        return StepOutcome::terminated;
    }

    // Per-turn identity and authorization checks.
    const auto* sa = registry_.find_identity(speaker.identity);
    const auto* ca = registry_.find_identity(counterpart.identity);
    if (!sa || !sa->active() || !ca || !ca->active()) {
        terminate_locked(s, TerminationReason::IdentityRetired);
        return StepOutcome::terminated;
    }
    if (!registry_.contacts_confirmed(s.initiator.user, s.responder.user)) {
        terminate_locked(s, TerminationReason::ContactRemoved);
        return StepOutcome::terminated;
    }
    if (!sa->permits_peer(counterpart.user) || !ca->permits_peer(speaker.user)) {
        terminate_locked(s, TerminationReason::PeerNotPermitted);
        return StepOutcome::terminated;
    }

    auto& rt = runtime_locked(speaker.user);
    runtime::TurnContext ctx;
    ctx.session = s.id;
    ctx.self = speaker.identity;
    ctx.counterpart = counterpart.identity;
    ctx.initiator = initiator_turn;
    ctx.intent = s.intent;
    ctx.turn_count = s.turn_count;
    ctx.own_turns = static_cast<std::size_t>(std::count_if(
        s.transcript.begin(), s.transcript.end(), [&](const runtime::Turn& t) { return t.speaker == speaker.identity; }));
    ctx.transcript = s.transcript;
    ctx.memory = memory_->entries(sa->memory_ns);

    runtime::PromptInputs pin;
    pin.session = s.id;
    pin.identity = speaker.identity;
    pin.context_tag = sa->context_tag;
    pin.counterpart = counterpart.identity;
    pin.counterpart_tag = ca->context_tag;
    pin.initiator = initiator_turn;
    pin.turn_count = s.turn_count;
    pin.max_turns = s.max_turns;
    pin.intent = s.intent;
    for (const auto& e : ctx.memory)
        if (e.layer == runtime::MemoryLayer::value) pin.constraints.push_back(e);
    ctx.prompt = runtime::render_role_prompt(pin);
    emit({"prompt", s.id.str(),
          {{"session", s.id.str()},
           {"identity", speaker.identity.str()},
           {"turn", std::to_string(s.turn_count)},
           {"digest", sha256_hex(ctx.prompt.text)}}});
    ++policy_calls_[speaker.user];
    const std::string tag = sa->context_tag;

    slot.stepping = true;
    lock.unlock();
    runtime::PolicyTurn pt;
    std::optional<std::string> failure;
    try {
        pt = rt.next_turn(ctx);
        for (const auto& w : pt.remember) rt.remember(speaker.identity.str(), speaker.identity, w.layer, w.key, w.value);
    } catch (const std::exception& e) {
        failure = e.what();
    }
    lock.lock();
    slot.stepping = false;

    if (failure) {
        AuditEntry attempted;
        attempted.action = "session.turn";
        attempted.owner = speaker.user;
        attempted.identity = speaker.identity;
        attempted.session = s.id;
        governance_->escalate(attempted, ViolatedLayer::session, "policy_failure: " + *failure);
        terminate_locked(s, TerminationReason::Fault, *failure);
        return StepOutcome::terminated;
    }

    std::string advice;
    if (pt.consult) {
        auto d = route_locked(Envelope{speaker.identity, identity::ManagerAgent{speaker.user}.address(), s.id, *pt.consult});
        if (d.delivered()) {
            slot.stepping = true;
            lock.unlock();
            try {
                advice = rt.consult_manager(runtime::AdvisorQuery{speaker.identity, tag, *pt.consult}).advice;
            } catch (const std::exception& e) {
                advice = std::string("consultation failed: ") + e.what();
            }
            lock.lock();
            slot.stepping = false;
        }
    }

    PendingTurn p;
    p.speaker = speaker.identity;
    p.turn = std::move(pt);
    p.advice = std::move(advice);
    s.pending = std::move(p);
    if (s.pending->turn.require_approval) {
        auto summary = expand(s, *s.pending, *s.pending->turn.require_approval);
        s.pending->approval_request = new_approval(s, speaker.user, ApprovalRole::action, summary);
        audit_owner(speaker.user, speaker.identity, "session.hold", s.id,
                    {{"request", *s.pending->approval_request}, {"summary", summary}});
    }
    return continue_turn(lock, slot);
}

StepOutcome Orchestrator::continue_turn(std::unique_lock<std::mutex>& lock, SessionSlot& slot) {
    auto& s = slot.s;
    const SessionId sid = s.id;
    {
        auto& p = *s.pending;
        if (p.approval_request) {
            const auto& req = approvals_.at(*p.approval_request);
            if (req.state == ApprovalState::pending) return StepOutcome::waiting;
            p.approval_outcome = std::string(to_string(req.state));
        }
    }
    const bool approved = !s.pending->approval_request || s.pending->approval_outcome == "approved";

    if (!s.pending->directives_done) {
        s.pending->directives_done = true;
        if (approved && !s.pending->turn.directives.empty()) {
            std::vector<std::pair<governance::Operation, std::string>> ops;
            for (const auto& dr : s.pending->turn.directives) {
                governance::Operation op;
                op.kind = dr.kind;
                for (const auto& t : dr.targets) op.targets.push_back(expand(s, *s.pending, t));
                op.issuer = s.pending->speaker;
                op.session = sid;
                std::string content = expand(s, *s.pending, dr.content);
                if (dr.kind == governance::OpKind::write) op.payload_digest = sha256_hex(content);
                ops.emplace_back(std::move(op), std::move(content));
            }
            slot.stepping = true;
            lock.unlock();
            std::vector<wire::DirectiveResult> results;
            for (const auto& [op, content] : ops) results.push_back(proxy_directive(op, content));
            lock.lock();
            slot.stepping = false;
            if (s.pending) s.pending->results = std::move(results);
        }
    }
    if (s.terminated() || !s.pending) return StepOutcome::terminated;

    if (!s.pending->spawned) {
        s.pending->spawned = true;
        if (approved) {
            auto spawns = s.pending->turn.spawn;
            for (const auto& sp : spawns) {
                try {
                    auto child = request_locked(sp.as.value_or(s.pending->speaker), sp.responder,
                                                expand(s, *s.pending, sp.intent), sid);
                    s.pending->children.push_back(child);
                } catch (const Error& e) {
                    s.pending->child_errors.push_back(sp.responder.str() + ": " + std::string(to_string(e.code())));
                }
            }
        }
    }
    for (const auto& c : s.pending->children)
        if (!session_locked(c).terminated()) return StepOutcome::waiting;

    if (s.abort_requested) {
        terminate_locked(s, TerminationReason::OwnerAbort);
        return StepOutcome::terminated;
    }

    auto& p = *s.pending;
    const bool initiator_turn = p.speaker == s.initiator.identity;
    const Party& speaker = initiator_turn ? s.initiator : s.responder;
    const Party& counterpart = initiator_turn ? s.responder : s.initiator;

    runtime::Turn t;
    t.speaker = p.speaker;
    t.content = expand(s, p, p.turn.content);
    for (const auto& [k, v] : p.turn.intent) t.intent.emplace_back(k, expand(s, p, v));
    t.end_marker = p.turn.end_marker;
    t.timestamp = clock_.now_ms();

    auto d = route_locked(Envelope{t.speaker, counterpart.identity.str(), sid, t.content});
    if (!d.delivered()) {
        terminate_locked(s, TerminationReason::Fault, "turn undeliverable: " + d.detail);
        return StepOutcome::terminated;
    }

    wire::Frame f;
    f.kind = wire::FrameKind::SESSION_TURN;
    f.msg_id = ids_.next("msg");
    f.session = sid;
    f.issuer = t.speaker.str();
    f.set("turn", std::to_string(s.turn_count)).set("to", counterpart.identity.str()).set("content", t.content);
    for (const auto& [k, v] : t.intent) f.set("intent." + k, v);
    f.set("end", t.end_marker ? "1" : "0");
    emit_frame(f, speaker.user.str(), counterpart.user.str());
    audit_owner(speaker.user, t.speaker, "session.turn", sid,
                {{"turn", std::to_string(s.turn_count)},
                 {"digest", sha256_hex(t.content)},
                 {"end", t.end_marker ? "1" : "0"}});

    s.transcript.push_back(std::move(t));
    ++s.turn_count;
    if (p.turn.end_marker) (initiator_turn ? s.initiator_ended : s.responder_ended) = true;
    s.pending.reset();

    if (s.initiator_ended && s.responder_ended) {
        terminate_locked(s, TerminationReason::Completed);
        return StepOutcome::terminated;
    }
    if (s.turn_count >= s.max_turns) {
        terminate_locked(s, TerminationReason::TurnLimit);
        return StepOutcome::terminated;
    }
    return StepOutcome::advanced;
}

std::string Orchestrator::child_results(const PendingTurn& p) const {
    std::vector<std::string> parts;
    for (const auto& cid : p.children) {
        const auto& c = sessions_.at(cid)->s;
        std::vector<std::string> said;
        for (const auto& t : c.transcript)
            if (t.speaker == c.responder.identity && !t.content.empty()) said.push_back(t.content);
        std::string part = c.responder.identity.str() + ": " + join(said, " / ");
        if (c.reason && *c.reason != TerminationReason::Completed)
            part += " [" + std::string(to_string(*c.reason)) + "]";
        parts.push_back(std::move(part));
    }
    for (const auto& e : p.child_errors) parts.push_back("[spawn failed " + e + "]");
    return join(parts, " | ");
}

std::string Orchestrator::expand(const CollaborationSession& s, const PendingTurn& p, const std::string& text) const {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) break;
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        out.append(text, pos, open - pos);
        std::string name = text.substr(open + 2, close - open - 2);
        std::string value;
        if (name.rfind("recall:", 0) == 0) {
            const auto key = name.substr(7);
            value = "unknown";
            if (const auto* a = registry_.find_identity(p.speaker)) {
                for (const auto& e : memory_->entries(a->memory_ns))
                    if (e.key == key) {
                        value = e.value;
                        break;
                    }
            }
        } else if (name == "advice") {
            value = p.advice;
        } else if (name == "child_results") {
            value = child_results(p);
        } else if (name == "last") {
            for (auto it = s.transcript.rbegin(); it != s.transcript.rend(); ++it)
                if (it->speaker != p.speaker) {
                    value = it->content;
                    break;
                }
        } else if (name == "intent") {
            value = s.intent;
        } else if (name == "approval") {
            value = p.approval_outcome.empty() ? "none" : p.approval_outcome;
        } else if (name.rfind("result:", 0) == 0) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(name.substr(7));
            } catch (const std::exception&) {
                idx = p.results.size();
            }
            if (idx < p.results.size()) {
                const auto& r = p.results[idx];
                if (!r.content.empty()) value = r.content;
                else if (!r.entries.empty()) value = join(r.entries, ",");
                else {
                    value = std::string(governance::to_string(r.result));
                    if (r.deny_reason) value += ":" + std::string(governance::to_string(*r.deny_reason));
                    if (r.error) value += ":" + std::string(to_string(*r.error));
                }
            } else {
                value = "none";
            }
        } else {
            value = text.substr(open, close + 2 - open);
        }
        out += value;
        pos = close + 2;
    }
    out.append(text, pos, std::string::npos);
    return out;
}

// -- routing and directives ---------------------------------------------------------

DeliveryResult Orchestrator::route(const Envelope& envelope) {
    std::lock_guard lock(mu_);
    return route_locked(envelope);
}

DeliveryResult Orchestrator::route_locked(const Envelope& env) {
    DeliveryResult r;
    const auto* from = registry_.find_identity(env.from);
    if (identity::is_manager_address(env.to)) {
        const UserId mowner(env.to.substr(0, env.to.find('/')));
        if (!registry_.find_user(mowner)) {
            r.status = DeliveryStatus::unknown_destination;
            r.detail = "no owner " + mowner.str();
        } else if (from && from->active() && from->owner == mowner) {
            r.status = DeliveryStatus::delivered;
            ++manager_deliveries_[mowner];
            ++deliveries_[mowner];
        } else {
            r.status = DeliveryStatus::structurally_unroutable;
            r.detail = env.from.str() + " is outside " + mowner.str();
            AuditEntry attempted;
            attempted.action = "route";
            attempted.targets = {env.to};
            attempted.owner = mowner;
            attempted.identity = env.from;
            attempted.session = env.session;
            r.escalation_id = governance_->escalate(attempted, ViolatedLayer::routing, "external_manager_target").event_id;
        }
    } else {
        const auto* to = registry_.find_identity(IdentityId(env.to));
        if (!to || !from) {
            r.status = DeliveryStatus::unknown_destination;
            r.detail = "unknown identity";
        } else if (!from->active() || !to->active()) {
            r.status = DeliveryStatus::not_in_session;
            r.detail = "retired identity";
        } else if (from->owner == to->owner) {
            r.status = DeliveryStatus::delivered;
            ++deliveries_[to->owner];
        } else {
            bool ok = false;
            if (env.session) {
                auto it = sessions_.find(*env.session);
                ok = it != sessions_.end() && it->second->s.state == SessionState::Active &&
                     it->second->s.participant(from->id) && it->second->s.participant(to->id);
            }
            if (ok) {
                r.status = DeliveryStatus::delivered;
                ++deliveries_[to->owner];
            } else {
                r.status = DeliveryStatus::not_in_session;
                r.detail = "no active session joins " + env.from.str() + " and " + env.to;
            }
        }
    }
    Fields f{{"from", env.from.str()}, {"to", env.to}, {"status", std::string(to_string(r.status))}};
    if (env.session) f.emplace_back("session", env.session->str());
    emit({"route", env.session ? env.session->str() : "-", std::move(f)});
    return r;
}

std::size_t Orchestrator::manager_deliveries(const UserId& owner) const {
    std::lock_guard lock(mu_);
    auto it = manager_deliveries_.find(owner);
    return it == manager_deliveries_.end() ? 0 : it->second;
}

std::size_t Orchestrator::total_manager_deliveries() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [o, c] : manager_deliveries_) n += c;
    return n;
}

std::size_t Orchestrator::deliveries_to(const UserId& owner) const {
    std::lock_guard lock(mu_);
    auto it = deliveries_.find(owner);
    return it == deliveries_.end() ? 0 : it->second;
}

std::size_t Orchestrator::policy_invocations(const UserId& owner) const {
    std::lock_guard lock(mu_);
    auto it = policy_calls_.find(owner);
    return it == policy_calls_.end() ? 0 : it->second;
}

wire::DirectiveResult Orchestrator::proxy_directive(const governance::Operation& op, const std::string& content) {
    wire::DirectiveResult res;
    AuditEntry entry;
    entry.action = std::string(governance::to_string(op.kind));
    entry.targets = op.targets;
    entry.owner = op.issuer.owner();
    entry.identity = op.issuer;
    entry.session = op.session;
    entry.payload_digest = op.payload_digest;

    auto failed = [&](Errc code, std::string detail) {
        res.result = AuditResult::failed_exec;
        res.error = code;
        res.detail = std::move(detail);
        entry.result = AuditResult::failed_exec;
        entry.ext.emplace_back("error", std::string(to_string(code)));
        governance_->record(entry);
        return res;
    };

    std::shared_ptr<NodeConnection> link;
    std::string node_name;
    {
        std::lock_guard lock(mu_);
        res.msg_id = ids_.next("msg");
        entry.ext.emplace_back("msg", res.msg_id);
        const auto* agent = registry_.find_identity(op.issuer);
        if (!agent) {
            res.result = AuditResult::failed_exec;
            res.error = Errc::UnknownIdentity;
            res.detail = "no identity " + op.issuer.str();
            if (registry_.find_user(entry.owner)) {
                entry.result = AuditResult::failed_exec;
                entry.ext.emplace_back("error", "UnknownIdentity");
                governance_->record(entry);
            }
            return res;
        }
        auto decision = l1_forced_open_ ? governance::Decision::allow() : governance::authorize_l1(op, *agent);
        if (!decision) {
            const std::string reason(governance::to_string(*decision.reason));
            res.result = AuditResult::denied_l1;
            res.deny_reason = decision.reason;
            res.detail = decision.detail;
            entry.result = AuditResult::denied_l1;
            entry.ext.emplace_back("reason", reason);
            governance_->record(entry);
            entry.ext.pop_back();
            governance_->escalate(entry, ViolatedLayer::L1, reason);
            return res;
        }
        auto it = node_links_.find(entry.owner);
        if (it != node_links_.end()) link = it->second;
        if (const auto* u = registry_.find_user(entry.owner); u && u->registered_node) node_name = u->registered_node->str();
    }
    if (!link || !link->connected()) return failed(Errc::NodeUnavailable, "no node connected for " + entry.owner.str());

    wire::Directive dir{res.msg_id, op, content};
    auto frame = wire::to_frame(dir);
    emit_frame(frame, entry.owner.str(), node_name);
    wire::Frame reply;
    try {
        reply = link->exchange(frame, settings_.node_timeout);
    } catch (const Error& e) {
        return failed(e.code() == Errc::Timeout ? Errc::Timeout : Errc::NodeUnavailable, e.what());
    }
    emit_frame(reply, node_name, entry.owner.str());
    const auto msg = res.msg_id;
    try {
        res = wire::result_from_frame(reply);
    } catch (const Error& e) {
        res = {};
        res.msg_id = msg;
        return failed(Errc::ProtocolError, e.what());
    }
    res.msg_id = msg;
    entry.result = res.result;
    if (res.deny_reason) entry.ext.emplace_back("reason", std::string(governance::to_string(*res.deny_reason)));
    if (res.error) entry.ext.emplace_back("error", std::string(to_string(*res.error)));
    if (!res.backup_id.empty()) entry.ext.emplace_back("backup", res.backup_id);
    if (res.local_seq) entry.ext.emplace_back("node_seq", std::to_string(*res.local_seq));
    governance_->record(entry);
    if (res.result == AuditResult::denied_l2) {
        AuditEntry attempted = entry;
        attempted.ext.clear();
        governance_->escalate(attempted, ViolatedLayer::L2,
                              res.deny_reason ? std::string(governance::to_string(*res.deny_reason)) : "denied");
    }
    return res;
}

// -- nodes -------------------------------------------------------------------------------

NodeRegistration Orchestrator::register_node(const wire::Frame& frame, std::shared_ptr<NodeConnection> connection) {
    if (frame.kind != wire::FrameKind::REGISTER_NODE) fail(Errc::ProtocolError, "expected REGISTER_NODE");
    NodeRegistration reg;
    reg.node = NodeId(frame.get("node"));
    reg.owner = UserId(frame.get("owner"));
    for (const auto& [k, v] : frame.body)
        if (k == "capability") reg.capabilities.push_back(v);
    if (reg.node.empty()) fail(Errc::ProtocolError, "REGISTER_NODE without node id");

    std::lock_guard lock(mu_);
    const auto* user = registry_.find_user(reg.owner);
    if (!user) fail(Errc::UnknownUser, "no user " + reg.owner.str());
    if (auto it = node_owner_.find(reg.node); it != node_owner_.end() && it->second != reg.owner)
        fail(Errc::OwnerMismatch, reg.node.str() + " belongs to " + it->second.str());
    if (user->registered_node && *user->registered_node != reg.node) {
        auto link = node_links_.find(reg.owner);
        if (link != node_links_.end() && link->second && link->second->connected())
            fail(Errc::DuplicateNode, reg.owner.str() + " already has node " + user->registered_node->str());
    }
    node_owner_[reg.node] = reg.owner;
    node_links_[reg.owner] = std::move(connection);
    registry_.set_registered_node(reg.owner, reg.node);
    emit_frame(frame, reg.node.str(), "orchestrator");
    audit_owner(reg.owner, owner_principal(reg.owner), "node.register", std::nullopt,
                {{"node", reg.node.str()}, {"capabilities", join(reg.capabilities, ",")}});
    return reg;
}

void Orchestrator::unregister_node(const NodeId& node) {
    std::lock_guard lock(mu_);
    auto it = node_owner_.find(node);
    if (it == node_owner_.end()) return;
    const auto* user = registry_.find_user(it->second);
    if (user && user->registered_node == node) {
        node_links_.erase(it->second);
        registry_.set_registered_node(it->second, std::nullopt);
        audit_owner(it->second, owner_principal(it->second), "node.unregister", std::nullopt, {{"node", node.str()}});
    }
}

std::optional<NodeId> Orchestrator::node_of(const UserId& owner) const {
    std::lock_guard lock(mu_);
    const auto* u = registry_.find_user(owner);
    if (!u) return std::nullopt;
    return u->registered_node;
}

wire::DirectiveResult Orchestrator::node_control(const UserId& owner, const std::string& control,
                                                 const std::string& key, const std::string& value) {
    std::shared_ptr<NodeConnection> link;
    std::string node_name;
    wire::Frame f;
    {
        std::lock_guard lock(mu_);
        if (!registry_.find_user(owner)) fail(Errc::UnknownUser, "no user " + owner.str());
        auto it = node_links_.find(owner);
        if (it != node_links_.end()) link = it->second;
        if (auto n = registry_.user(owner).registered_node) node_name = n->str();
        f.kind = wire::FrameKind::DIRECTIVE;
        f.msg_id = ids_.next("msg");
        f.issuer = owner_principal(owner).str();
        f.set("control", control).set(key, value);
    }
    if (!link || !link->connected()) fail(Errc::NodeUnavailable, "no node connected for " + owner.str());
    emit_frame(f, owner.str(), node_name);
    auto reply = link->exchange(f, settings_.node_timeout);
    emit_frame(reply, node_name, owner.str());
    auto res = wire::result_from_frame(reply);
    Fields ext{{key, value}, {"entries", std::to_string(res.entries.size())}};
    if (res.error) ext.emplace_back("error", std::string(to_string(*res.error)));
    audit_owner(owner, owner_principal(owner), "node." + control, std::nullopt, ext,
                res.executed() ? AuditResult::allowed_executed : AuditResult::failed_exec);
    return res;
}

wire::DirectiveResult Orchestrator::node_undo(const UserId& owner, std::size_t count) {
    return node_control(owner, "undo", "count", std::to_string(count));
}

wire::DirectiveResult Orchestrator::node_rollback(const UserId& owner, std::uint64_t to_seq) {
    return node_control(owner, "rollback", "to_seq", std::to_string(to_seq));
}

}  // namespace clawnet::orchestrator

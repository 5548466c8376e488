#include "clawnet/common/error.hpp"
#include "clawnet/node/tree_hash.hpp"
#include "clawnet/orchestrator/orchestrator.hpp"
#include "support/fixture.hpp"
#include "support/s_cases.hpp"

#include <doctest.h>

using namespace clawnet;
using namespace clawnet::orchestrator;
using governance::AuditResult;
using governance::DenyReason;
using governance::OpKind;
using governance::ViolatedLayer;
using testsupport::TempDir;
using testsupport::World;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::InvalidArgument;
}

/// u1 (identity a) and u2 (identity b), mutual contacts and presented.
struct Pair {
    World w;
    IdentityId a, b;

    explicit Pair(Settings s = {}) : w(std::move(s)) {
        w.add_users({"u1", "u2"});
        a = w.identity("u1", "work", "/home/u1/work:mutative", {"u2"});
        b = w.identity("u2", "ops", "/home/u2:read_only", {"u1"});
        w.contact("u1", "u2");
        w.present("u1", "u2", a);
        w.present("u2", "u1", b);
    }
    SessionId open(const std::string& intent = "talk") {
        auto sid = w.orch->request_collaboration(a, UserId("u2"), intent);
        w.approve_all();
        return sid;
    }
    CollaborationSession get(const SessionId& id) const { return *w.orch->session(id); }
};

runtime::PolicyTurn say(std::string content, bool end = false) {
    runtime::PolicyTurn t;
    t.content = std::move(content);
    t.end_marker = end;
    return t;
}

governance::Operation op(OpKind k, std::vector<std::string> targets, IdentityId issuer) {
    governance::Operation o;
    o.kind = k;
    o.targets = std::move(targets);
    o.issuer = std::move(issuer);
    return o;
}

}  // namespace

TEST_CASE("session establishment follows the four-condition predicate") {
    for (int bits = 0; bits < 16; ++bits) {
        auto c = testsupport::SCase::from_bits(bits);
        auto out = testsupport::run_s_case(c);
        INFO(c.name());
        CHECK(out.active == c.expected());
        if (!c.contact) {
            CHECK(out.error == Errc::NoContact);
            if (c.assigned) CHECK(out.assign_error == Errc::NoConfirmedContact);
        } else if (!c.assigned) {
            CHECK(out.error == Errc::NoAssignedIdentity);
        } else if (!c.u_in_pj || !c.v_in_pi) {
            CHECK(out.error == Errc::PeerNotPermitted);
            CHECK(out.session_escalations == 1);
        } else {
            CHECK_FALSE(out.error.has_value());
            CHECK(out.session_escalations == 0);
        }
    }
}

TEST_CASE("request preconditions") {
    Pair p;
    CHECK(code_of([&] { p.w.orch->request_collaboration(IdentityId("u1/none-0000"), UserId("u2"), "x"); }) ==
          Errc::UnknownIdentity);
    CHECK(code_of([&] { p.w.orch->request_collaboration(p.a, UserId("u9"), "x"); }) == Errc::UnknownUser);
    CHECK(code_of([&] { p.w.orch->request_collaboration(p.a, UserId("u1"), "x"); }) == Errc::InvalidArgument);
}

TEST_CASE("both owners approve before a session becomes active") {
    Pair p;
    auto sid = p.w.orch->request_collaboration(p.a, UserId("u2"), "buy toner");
    CHECK(p.get(sid).state == SessionState::PendingInitiatorApproval);
    auto pending = p.w.orch->pending_approvals();
    REQUIRE(pending.size() == 1);
    CHECK(pending[0].approver == UserId("u1"));
    CHECK(pending[0].role == ApprovalRole::initiator);
    CHECK(code_of([&] { p.w.orch->resolve_approval(pending[0].request_id, UserId("u2"), Decision::approve); }) ==
          Errc::NotApprover);
    CHECK(code_of([&] { p.w.orch->resolve_approval("req-none", UserId("u1"), Decision::approve); }) ==
          Errc::UnknownRequest);
    CHECK(p.w.orch->resolve_approval(pending[0].request_id, UserId("u1"), Decision::approve) ==
          SessionState::PendingResponderApproval);
    CHECK(code_of([&] { p.w.orch->resolve_approval(pending[0].request_id, UserId("u1"), Decision::approve); }) ==
          Errc::AlreadyResolved);
    auto second = p.w.orch->pending_approvals(UserId("u2"));
    REQUIRE(second.size() == 1);
    CHECK(second[0].role == ApprovalRole::responder);
    CHECK(p.w.orch->pending_approvals(UserId("u1")).empty());
    CHECK(p.w.orch->resolve_approval(second[0].request_id, UserId("u2"), Decision::approve) == SessionState::Active);
    CHECK(p.w.count("frame") > 0);
}

TEST_CASE("rejection by either owner terminates") {
    Pair p;
    auto s1 = p.w.orch->request_collaboration(p.a, UserId("u2"), "x");
    p.w.orch->resolve_approval(p.w.orch->pending_approvals()[0].request_id, UserId("u1"), Decision::reject);
    CHECK(p.get(s1).reason == TerminationReason::RejectedByInitiator);
    CHECK(p.w.orch->pending_approvals().empty());

    auto s2 = p.w.orch->request_collaboration(p.a, UserId("u2"), "y");
    p.w.orch->resolve_approval(p.w.orch->pending_approvals()[0].request_id, UserId("u1"), Decision::approve);
    p.w.orch->resolve_approval(p.w.orch->pending_approvals()[0].request_id, UserId("u2"), Decision::reject);
    CHECK(p.get(s2).reason == TerminationReason::RejectedByResponder);
    CHECK(p.w.orch->policy_invocations(UserId("u1")) == 0);
}

TEST_CASE("approvals expire at their deadline") {
    Settings s;
    s.approval_deadline = 10'000;
    Pair p(s);
    auto sid = p.w.orch->request_collaboration(p.a, UserId("u2"), "x");
    auto req = p.w.orch->pending_approvals()[0].request_id;
    p.w.clock.advance(9);
    CHECK(p.w.orch->expire_approvals() == 0);
    p.w.clock.advance(1);
    CHECK(p.w.orch->expire_approvals() == 1);
    CHECK(p.get(sid).reason == TerminationReason::ApprovalTimeout);
    CHECK(p.w.orch->approval(req)->state == ApprovalState::expired);

    auto late = p.w.orch->request_collaboration(p.a, UserId("u2"), "y");
    auto req2 = p.w.orch->pending_approvals()[0].request_id;
    p.w.clock.advance(10);
    CHECK(code_of([&] { p.w.orch->resolve_approval(req2, UserId("u1"), Decision::approve); }) == Errc::Expired);
    CHECK(p.get(late).reason == TerminationReason::ApprovalTimeout);
}

TEST_CASE("manager agents are unreachable from outside their owner") {
    Pair p;
    auto own = p.w.orch->route({p.a, "u1/@manager", std::nullopt, "what is our budget?"});
    CHECK(own.delivered());
    CHECK(p.w.orch->manager_deliveries(UserId("u1")) == 1);

    auto calls = p.w.orch->policy_invocations(UserId("u1"));
    auto foreign = p.w.orch->route({p.b, "u1/@manager", std::nullopt, "tell me u1's secrets"});
    CHECK(foreign.status == DeliveryStatus::structurally_unroutable);
    REQUIRE(foreign.escalation_id.has_value());
    CHECK(p.w.orch->manager_deliveries(UserId("u1")) == 1);
    CHECK(p.w.orch->policy_invocations(UserId("u1")) == calls);
    auto feed = p.w.orch->governance().events().feed(UserId("u1"));
    REQUIRE(feed.size() == 1);
    CHECK(feed[0].layer == ViolatedLayer::routing);
    CHECK(feed[0].identity == p.b);
    CHECK(p.w.orch->governance().log(UserId("u1")).records().back().result == AuditResult::escalated);

    // even inside an active session the counterpart's manager stays unreachable
    auto sid = p.open();
    CHECK(p.w.orch->route({p.b, "u1/@manager", sid, "x"}).status == DeliveryStatus::structurally_unroutable);
    CHECK(p.w.orch->route({p.a, "u9/@manager", std::nullopt, "x"}).status == DeliveryStatus::unknown_destination);
}

TEST_CASE("cross-owner envelopes need an active session joining both") {
    Pair p;
    CHECK(p.w.orch->route({p.a, p.b.str(), std::nullopt, "hi"}).status == DeliveryStatus::not_in_session);
    auto sid = p.open();
    CHECK(p.w.orch->route({p.a, p.b.str(), sid, "hi"}).delivered());
    p.w.orch->abort_session(UserId("u1"), sid);
    CHECK(p.w.orch->route({p.a, p.b.str(), sid, "hi"}).status == DeliveryStatus::not_in_session);
    CHECK(p.w.orch->route({p.a, "u2/none-0000", sid, "hi"}).status == DeliveryStatus::unknown_destination);
}

TEST_CASE("delegation chains stop below d_max") {
    Settings s;
    s.d_max = 3;
    World w(s);
    w.add_users({"u1", "u2", "u3", "u4", "u5"});
    std::vector<IdentityId> ids;
    for (int k = 1; k <= 5; ++k) {
        std::set<std::string> peers;
        if (k > 1) peers.insert("u" + std::to_string(k - 1));
        if (k < 5) peers.insert("u" + std::to_string(k + 1));
        ids.push_back(w.identity("u" + std::to_string(k), "t", "/home/u" + std::to_string(k) + ":read_only", peers));
    }
    for (int k = 1; k < 5; ++k) {
        auto a = "u" + std::to_string(k), b = "u" + std::to_string(k + 1);
        w.contact(a, b);
        w.present(b, a, ids[static_cast<std::size_t>(k)]);
    }
    auto s0 = w.orch->request_collaboration(ids[0], UserId("u2"), "level 0");
    w.approve_all();
    auto s1 = w.orch->request_collaboration(ids[1], UserId("u3"), "level 1", s0);
    w.approve_all();
    auto s2 = w.orch->request_collaboration(ids[2], UserId("u4"), "level 2", s1);
    w.approve_all();
    CHECK(w.orch->session(s1)->depth == 1);
    CHECK(w.orch->session(s2)->depth == 2);
    CHECK(code_of([&] { w.orch->request_collaboration(ids[3], UserId("u5"), "level 3", s2); }) ==
          Errc::DepthExceeded);
    // the parent must involve the initiating owner
    CHECK(code_of([&] { w.orch->request_collaboration(ids[3], UserId("u5"), "x", s0); }) == Errc::NotInSession);
    CHECK(w.orch->sessions().size() == 3);
}

TEST_CASE("max_turns terminates at exactly the limit") {
    Settings s;
    s.max_turns = 5;
    Pair p(s);
    p.w.echo(p.a);
    p.w.echo(p.b);
    auto sid = p.open();
    std::vector<std::string> speakers;
    auto reason = p.w.orch->run_dialogue(sid, [&](const runtime::Turn& t) { speakers.push_back(t.speaker.str()); });
    CHECK(reason == TerminationReason::TurnLimit);
    CHECK(p.get(sid).transcript.size() == 5);
    CHECK(speakers == std::vector<std::string>{p.a.str(), p.b.str(), p.a.str(), p.b.str(), p.a.str()});
    CHECK(p.w.orch->step_session(sid) == StepOutcome::terminated);
    CHECK(p.get(sid).transcript.size() == 5);
}

TEST_CASE("both end markers complete the session") {
    Pair p;
    p.w.echo(p.a, 2);
    p.w.echo(p.b, 2);
    auto sid = p.open("ping");
    CHECK(p.w.orch->run_dialogue(sid) == TerminationReason::Completed);
    auto t = p.get(sid).transcript;
    REQUIRE(t.size() == 4);
    CHECK(t[0].content == "ping");
    CHECK(t[3].end_marker);
}

TEST_CASE("a side that ended does not speak again") {
    Pair p;
    p.w.echo(p.a, 1);
    p.w.echo(p.b);
    auto sid = p.open();
    CHECK(p.w.orch->run_dialogue(sid) == TerminationReason::Completed);
    CHECK(p.get(sid).transcript.size() == 2);
}

TEST_CASE("owner abort after k turns leaves exactly k turns") {
    for (std::size_t k : {0u, 1u, 3u}) {
        Pair p;
        p.w.echo(p.a);
        p.w.echo(p.b);
        auto sid = p.open();
        for (std::size_t i = 0; i < k; ++i) REQUIRE(p.w.orch->step_session(sid) == StepOutcome::advanced);
        CHECK(code_of([&] { p.w.orch->abort_session(UserId("u3"), sid); }) == Errc::NotOwner);
        p.w.orch->abort_session(UserId("u2"), sid);
        CHECK(p.w.orch->step_session(sid) == StepOutcome::terminated);
        INFO("k=" << k);
        CHECK(p.get(sid).transcript.size() == k);
        CHECK(p.get(sid).reason == TerminationReason::OwnerAbort);
        CHECK(code_of([&] { p.w.orch->abort_session(UserId("u1"), SessionId("ses-none")); }) ==
              Errc::UnknownSession);
    }
}

TEST_CASE("aborting a parent cascades to children waiting on it") {
    World w;
    w.add_users({"u1", "u2", "u3"});
    auto a = w.identity("u1", "a", "/home/u1:read_only", {"u2"});
    auto b = w.identity("u2", "b", "/home/u2:read_only", {"u1", "u3"});
    auto c = w.identity("u3", "c", "/home/u3:read_only", {"u2"});
    w.contact("u1", "u2");
    w.contact("u2", "u3");
    w.present("u2", "u1", b);
    w.present("u3", "u2", c);
    w.echo(a);
    w.echo(c);
    runtime::Script script;
    auto spawn = say("asked around: {{child_results}}");
    spawn.spawn.push_back({UserId("u3"), "sub-question", std::nullopt});
    script.steps = {spawn};
    w.orch->bind_policy(b, std::make_shared<runtime::ScriptedPolicy>(script));
    auto parent = w.orch->request_collaboration(a, UserId("u2"), "q");
    w.approve_all();
    CHECK(w.orch->step_session(parent) == StepOutcome::advanced);
    CHECK(w.orch->step_session(parent) == StepOutcome::waiting);
    auto all = w.orch->sessions();
    REQUIRE(all.size() == 2);
    auto child = all[0].id == parent ? all[1].id : all[0].id;
    CHECK(w.orch->session(child)->chain_parent == parent);
    CHECK(w.orch->session(child)->depth == 1);
    w.orch->abort_session(UserId("u1"), parent);
    CHECK(w.orch->session(parent)->reason == TerminationReason::OwnerAbort);
    CHECK(w.orch->session(child)->reason == TerminationReason::OwnerAbort);
}

TEST_CASE("retirement, contact removal and peer changes end live sessions") {
    {
        Pair p;
        p.w.echo(p.a);
        p.w.echo(p.b);
        auto sid = p.open();
        p.w.orch->step_session(sid);
        auto receipt = p.w.orch->retire_identity(UserId("u2"), p.b);
        CHECK(receipt.terminated_sessions == std::vector<SessionId>{sid});
        CHECK(p.get(sid).reason == TerminationReason::IdentityRetired);
        CHECK(code_of([&] { p.w.orch->request_collaboration(p.a, UserId("u2"), "again"); }) ==
              Errc::IdentityRetired);
        CHECK(p.w.orch->memory().archived(p.w.orch->find_identity(p.b)->memory_ns));
    }
    {
        Pair p;
        p.w.echo(p.a);
        p.w.echo(p.b);
        auto sid = p.open();
        p.w.orch->step_session(sid);
        p.w.orch->remove_contact(UserId("u1"), UserId("u2"));
        CHECK(p.w.orch->step_session(sid) == StepOutcome::terminated);
        CHECK(p.get(sid).reason == TerminationReason::ContactRemoved);
        CHECK(p.get(sid).transcript.size() == 1);
    }
    {
        Pair p;
        p.w.echo(p.a);
        p.w.echo(p.b);
        auto sid = p.open();
        p.w.orch->update_peers(UserId("u1"), p.a, {});
        CHECK(p.w.orch->step_session(sid) == StepOutcome::terminated);
        CHECK(p.get(sid).reason == TerminationReason::PeerNotPermitted);
        CHECK(p.get(sid).transcript.empty());
    }
}

TEST_CASE("a failing policy faults the session and escalates") {
    Pair p;
    p.w.orch->bind_policy(p.a, std::make_shared<runtime::LlmAdapterPolicy>());
    auto sid = p.open();
    CHECK(p.w.orch->step_session(sid) == StepOutcome::terminated);
    CHECK(p.get(sid).reason == TerminationReason::Fault);
    CHECK(p.w.orch->governance().events().count(UserId("u1"), ViolatedLayer::session) == 1);
}

TEST_CASE("an action hold blocks the turn until the owner decides") {
    for (auto decision : {Decision::approve, Decision::reject}) {
        TempDir dir;
        Pair p;
        testsupport::write_file(testsupport::under(dir.path(), "/home/u1/work/po.txt"), "draft");
        testsupport::AttachedNode node(p.w, testsupport::node_config("u1", {"/home/u1/work"}, dir.path()));
        auto t = say("order is {{approval}}: {{result:0}}");
        t.require_approval = "send purchase order for {{intent}}";
        t.directives.push_back({OpKind::write, {"/home/u1/work/po.txt"}, "final"});
        runtime::Script script;
        script.steps = {t};
        p.w.orch->bind_policy(p.a, std::make_shared<runtime::ScriptedPolicy>(script));
        p.w.echo(p.b);
        auto sid = p.open("toner");
        CHECK(p.w.orch->step_session(sid) == StepOutcome::waiting);
        CHECK(p.w.orch->step_session(sid) == StepOutcome::waiting);
        auto hold = p.w.orch->pending_approvals(UserId("u1"));
        REQUIRE(hold.size() == 1);
        CHECK(hold[0].role == ApprovalRole::action);
        CHECK(hold[0].summary == "send purchase order for toner");
        CHECK(node.link->frames_delivered() == 0);
        p.w.orch->resolve_approval(hold[0].request_id, UserId("u1"), decision);
        CHECK(p.w.orch->step_session(sid) == StepOutcome::advanced);
        auto content = p.get(sid).transcript.at(0).content;
        auto file = testsupport::read_file(testsupport::under(dir.path(), "/home/u1/work/po.txt"));
        if (decision == Decision::approve) {
            CHECK(content == "order is approved: allowed_executed");
            CHECK(file == "final");
            CHECK(node.link->frames_delivered() == 1);
        } else {
            CHECK(content == "order is rejected: none");
            CHECK(file == "draft");
            CHECK(node.link->frames_delivered() == 0);
        }
    }
}

TEST_CASE("directive proxy: L1 before the node, L2 on the node") {
    TempDir dir;
    Pair p;
    testsupport::write_file(testsupport::under(dir.path(), "/home/u1/work/a.txt"), "v1");
    testsupport::write_file(testsupport::under(dir.path(), "/home/u1/private/diary.md"), "secret");
    testsupport::AttachedNode node(p.w, testsupport::node_config("u1", {"/home/u1/work"}, dir.path()));
    CHECK(p.w.orch->node_of(UserId("u1")) == NodeId("u1-node"));
    auto home = testsupport::under(dir.path(), "/home");
    auto before = node::tree_hash(home);

    auto ok = p.w.orch->proxy_directive(op(OpKind::read, {"/home/u1/work/a.txt"}, p.a));
    CHECK(ok.executed());
    CHECK(ok.content == "v1");
    CHECK(node.link->frames_delivered() == 1);

    auto l1 = p.w.orch->proxy_directive(op(OpKind::read, {"/home/u1/private/diary.md"}, p.a));
    CHECK(l1.result == AuditResult::denied_l1);
    CHECK(l1.deny_reason == DenyReason::out_of_scope);
    CHECK(node.link->frames_delivered() == 1);
    CHECK(p.w.orch->governance().events().count(UserId("u1"), ViolatedLayer::L1) == 1);

    p.w.orch->force_l1_open(true);
    auto l2 = p.w.orch->proxy_directive(op(OpKind::write, {"/home/u1/private/diary.md"}, p.a), "pwned");
    p.w.orch->force_l1_open(false);
    CHECK(l2.result == AuditResult::denied_l2);
    CHECK(l2.deny_reason == DenyReason::outside_whitelist);
    CHECK(node.link->frames_delivered() == 2);
    CHECK(p.w.orch->governance().events().count(UserId("u1"), ViolatedLayer::L2) == 1);
    CHECK(node::tree_hash(home) == before);

    auto recs = p.w.orch->governance().log(UserId("u1")).records();
    std::vector<AuditResult> results;
    for (const auto& r : recs)
        if (r.action == "read" || r.action == "write") results.push_back(r.result);
    CHECK(results == std::vector<AuditResult>{AuditResult::allowed_executed, AuditResult::denied_l1,
                                              AuditResult::escalated, AuditResult::denied_l2,
                                              AuditResult::escalated});

    auto ro = p.w.orch->proxy_directive(op(OpKind::write, {"/home/u2/x"}, p.b), "x");
    CHECK(ro.deny_reason == DenyReason::class_insufficient);

    node.link->drop();
    auto gone = p.w.orch->proxy_directive(op(OpKind::read, {"/home/u1/work/a.txt"}, p.a));
    CHECK(gone.error == Errc::NodeUnavailable);
    CHECK(gone.result == AuditResult::failed_exec);
    node.link->restore();

    p.w.orch->retire_identity(UserId("u1"), p.a);
    auto retired = p.w.orch->proxy_directive(op(OpKind::read, {"/home/u1/work/a.txt"}, p.a));
    CHECK(retired.deny_reason == DenyReason::identity_retired);
    CHECK(p.w.orch->governance().log(UserId("u1")).verify().ok);
}

TEST_CASE("owner undo and rollback go through the node") {
    TempDir dir;
    Pair p;
    testsupport::write_file(testsupport::under(dir.path(), "/home/u1/work/a.txt"), "v1");
    testsupport::AttachedNode node(p.w, testsupport::node_config("u1", {"/home/u1/work"}, dir.path()));
    auto w1 = op(OpKind::write, {"/home/u1/work/a.txt"}, p.a);
    w1.payload_digest = sha256_hex("v2");
    REQUIRE(p.w.orch->proxy_directive(w1, "v2").executed());
    REQUIRE(p.w.orch->proxy_directive(op(OpKind::mkdir, {"/home/u1/work/d"}, p.a)).executed());
    auto undo = p.w.orch->node_undo(UserId("u1"), 1);
    CHECK(undo.entries == std::vector<std::string>{"reversed:1:mkdir"});
    auto rb = p.w.orch->node_rollback(UserId("u1"), 0);
    CHECK(rb.entries == std::vector<std::string>{"reversed:0:write"});
    CHECK(testsupport::read_file(testsupport::under(dir.path(), "/home/u1/work/a.txt")) == "v1");
    CHECK(p.w.orch->governance().log(UserId("u1")).records().back().action == "node.rollback");
    CHECK(code_of([&] { p.w.orch->node_undo(UserId("u2"), 1); }) == Errc::NodeUnavailable);
}

TEST_CASE("node registration rules") {
    TempDir dir;
    Pair p;
    testsupport::AttachedNode n1(p.w, testsupport::node_config("u1", {"/home/u1/work"}, dir.path()));
    auto cfg = testsupport::node_config("u9", {"/home/u9"}, dir.path());
    node::NodeEndpoint stranger(cfg, p.w.clock, nullptr, false);
    auto link = std::make_shared<InMemoryNodeConnection>(stranger);
    CHECK(code_of([&] { p.w.orch->register_node(stranger.registration_frame(), link); }) == Errc::UnknownUser);

    auto f = n1.endpoint->registration_frame();
    f.set("owner", "u2");
    f.body.erase(std::remove_if(f.body.begin(), f.body.end(),
                                [](const auto& kv) { return kv.first == "owner" && kv.second == "u1"; }),
                 f.body.end());
    CHECK(code_of([&] { p.w.orch->register_node(f, n1.link); }) == Errc::OwnerMismatch);

    auto second = n1.endpoint->registration_frame();
    second.body.clear();
    second.set("node", "u1-laptop2").set("owner", "u1");
    CHECK(code_of([&] { p.w.orch->register_node(second, n1.link); }) == Errc::DuplicateNode);

    // re-registration of the same node after a reconnect is fine
    auto reg = p.w.orch->register_node(n1.endpoint->registration_frame(), n1.link);
    CHECK(reg.capabilities.size() == 9);
    p.w.orch->unregister_node(NodeId("u1-node"));
    CHECK_FALSE(p.w.orch->node_of(UserId("u1")).has_value());
}

TEST_CASE("every owner log stays intact through a busy run") {
    Pair p;
    p.w.echo(p.a, 3);
    p.w.echo(p.b, 3);
    for (int i = 0; i < 5; ++i) p.w.orch->run_dialogue(p.open("round " + std::to_string(i)));
    p.w.orch->route({p.b, "u1/@manager", std::nullopt, "x"});
    for (const auto& u : p.w.orch->governance().owners_with_logs()) CHECK(p.w.orch->governance().log(u).verify().ok);
    CHECK(p.w.orch->registry_invariants_hold());
}

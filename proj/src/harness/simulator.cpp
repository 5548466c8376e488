#include "clawnet/harness/simulator.hpp"

#include "clawnet/common/digest.hpp"
#include "clawnet/common/error.hpp"
#include "clawnet/identity/path.hpp"
#include "clawnet/net/node_transport.hpp"
#include "clawnet/node/tree_hash.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

namespace clawnet::harness {

namespace fs = std::filesystem;
using governance::AuditResult;

namespace {

fs::path make_sandbox() {
    auto tmpl = (fs::temp_directory_path() / "clawnet-sim-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) fail(Errc::StorageFailure, "cannot create sandbox directory");
    return tmpl;
}

fs::path under(const fs::path& root, const std::string& logical) {
    auto norm = identity::normalize_path(logical);
    if (!norm) fail(Errc::ScenarioParseError, "fixture path '" + logical + "' is not absolute and normal");
    return root / norm->substr(1);
}

bool matches(const TraceEvent& e, const EventPattern& p) {
    if (e.kind != p.kind) return false;
    for (const auto& [k, v] : p.match) {
        auto got = field(e.fields, k);
        if (!got) return false;
        if (!v.empty() && v[0] == '~') {
            if (got->find(v.substr(1)) == std::string::npos) return false;
        } else if (*got != v) {
            return false;
        }
    }
    return true;
}

std::string describe(const EventPattern& p) {
    std::string s = p.kind + "{";
    for (const auto& [k, v] : p.match) s += k + "=" + v + " ";
    return s + "}";
}

}  // namespace

void build_fixture(const UserSpec& user, const fs::path& root) {
    for (const auto& r : user.roots) fs::create_directories(under(root, r));
    for (const auto& d : user.dirs) fs::create_directories(under(root, d));
    for (const auto& [path, content] : user.files) {
        auto p = under(root, path);
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << content;
    }
    for (const auto& [path, target] : user.symlinks) {
        auto p = under(root, path);
        fs::create_directories(p.parent_path());
        fs::create_symlink(target, p);
    }
}

Simulator::Simulator(Scenario scenario, SimOptions options)
    : scenario_(std::move(scenario)),
      options_(std::move(options)),
      ids_(options_.seed.value_or(scenario_.seed)) {
    if (options_.work_dir) {
        sandbox_ = *options_.work_dir;
        fs::create_directories(sandbox_);
    } else {
        sandbox_ = make_sandbox();
        owns_sandbox_ = true;
    }
    orchestrator::Settings s;
    s.d_max = scenario_.settings.d_max;
    s.max_turns = scenario_.settings.max_turns;
    s.approval_deadline = scenario_.settings.approval_deadline * clock_.ms_per_tick();
    s.state_dir = sandbox_ / "server";
    s.durable = false;
    orch_ = std::make_unique<orchestrator::Orchestrator>(clock_, ids_, sink_, s);
}

Simulator::~Simulator() {
    clients_.clear();
    if (listener_) listener_->stop();
    if (owns_sandbox_ && !options_.keep) {
        std::error_code ec;
        fs::remove_all(sandbox_, ec);
    }
}

node::NodeEndpoint* Simulator::node(const std::string& owner) {
    auto it = nodes_.find(owner);
    return it == nodes_.end() ? nullptr : it->second.get();
}

orchestrator::InMemoryNodeConnection* Simulator::memory_link(const std::string& owner) {
    auto it = links_.find(owner);
    return it == links_.end() ? nullptr : it->second.get();
}

IdentityId Simulator::identity(const std::string& alias) const {
    auto it = aliases_.find(alias);
    if (it == aliases_.end()) fail(Errc::ScenarioParseError, "unknown identity alias '" + alias + "'");
    return it->second;
}

fs::path Simulator::physical(const std::string& owner, const std::string& logical) const {
    return under(sandbox_ / "fs" / owner, logical);
}

void Simulator::setup() {
    if (setup_done_) return;
    setup_done_ = true;
    clock_.set_tick(0);
    auto& o = *orch_;
    for (const auto& u : scenario_.users) {
        build_fixture(u, sandbox_ / "fs" / u.id);
        o.add_user(UserId(u.id), u.roots);
    }
    for (const auto& x : scenario_.identities) {
        std::set<UserId> peers;
        for (const auto& p : x.peers) peers.insert(UserId(p));
        auto agent = o.create_identity(UserId(x.owner), x.tag, identity::AuthorizationScope::parse(x.scope), peers);
        aliases_[x.name] = agent.id;
    }
    for (const auto& c : scenario_.contacts) {
        o.request_contact(UserId(c.a), UserId(c.b));
        if (c.confirmed) o.confirm_contact(UserId(c.b), UserId(c.a));
        if (c.a_presents) o.assign_contact_identity(UserId(c.a), UserId(c.b), identity(*c.a_presents));
        if (c.b_presents) o.assign_contact_identity(UserId(c.b), UserId(c.a), identity(*c.b_presents));
    }
    for (const auto& x : scenario_.identities) {
        auto id = identity(x.name);
        for (const auto& m : x.memory) o.runtime(UserId(x.owner)).remember(x.owner, id, m.layer, m.key, m.value);
        std::shared_ptr<runtime::Policy> policy;
        if (x.policy == "scripted") {
            auto script = scenario_.scripts.at(x.script);
            auto resolve = [&](std::vector<runtime::PolicyTurn>& steps) {
                for (auto& st : steps)
                    for (auto& sp : st.spawn)
                        if (sp.as) sp.as = identity(sp.as->str());
            };
            resolve(script.steps);
            if (script.as_initiator) resolve(*script.as_initiator);
            if (script.as_responder) resolve(*script.as_responder);
            policy = std::make_shared<runtime::ScriptedPolicy>(std::move(script));
        } else if (x.policy == "echo") {
            policy = std::make_shared<runtime::EchoPolicy>(x.echo_turns);
        } else if (x.policy == "llm-adapter") {
            policy = std::make_shared<runtime::LlmAdapterPolicy>();
        }
        if (policy) o.bind_policy(id, std::move(policy));
    }
    if (options_.transport == Transport::socket) listener_ = std::make_unique<net::NodeListener>(o, "127.0.0.1", 0);
    for (const auto& n : scenario_.nodes) {
        node::NodeConfig cfg;
        cfg.node_id = NodeId(n.node_id);
        cfg.owner = UserId(n.owner);
        cfg.whitelist = n.whitelist;
        cfg.staging_root = n.staging_root;
        cfg.backup_root = n.backup_root;
        cfg.fs_root = sandbox_ / "fs" / n.owner;
        auto ep = std::make_unique<node::NodeEndpoint>(cfg, clock_, &sink_, false);
        if (options_.transport == Transport::socket) {
            auto client = std::make_unique<net::NodeClient>(*ep, "127.0.0.1", listener_->port());
            client->start();
            if (!listener_->wait_registered(cfg.node_id, std::chrono::seconds(10)))
                fail(Errc::NodeUnavailable, "node " + n.node_id + " did not register: " + client->last_error());
            clients_.push_back(std::move(client));
        } else {
            auto link = std::make_shared<orchestrator::InMemoryNodeConnection>(*ep);
            o.register_node(ep->registration_frame(), link);
            links_[n.owner] = link;
        }
        nodes_[n.owner] = std::move(ep);
    }
    for (const auto& t : scenario_.expect.trees)
        initial_trees_[{t.owner, t.path}] = node::tree_hash(physical(t.owner, t.path));
}

std::optional<SessionId> Simulator::session_at(const std::string& index) const {
    auto all = orch_->sessions();
    std::size_t i = 0;
    try {
        i = std::stoul(index);
    } catch (const std::exception&) {
        fail(Errc::ScenarioParseError, "session index '" + index + "' is not a number");
    }
    if (i >= all.size()) return std::nullopt;
    return all[i].id;
}

bool Simulator::apply(const OwnerAction& a) {
    auto& o = *orch_;
    auto arg = [&](const char* k) -> std::string {
        auto it = a.args.find(k);
        if (it == a.args.end()) fail(Errc::ScenarioParseError, "action '" + a.action + "' needs '" + k + "'");
        return it->second;
    };
    auto has = [&](const char* k) { return a.args.count(k) != 0; };
    Fields f{{"do", a.action}, {"tick", std::to_string(clock_.tick())}};
    auto note = [&](Fields extra) {
        f.insert(f.end(), extra.begin(), extra.end());
        sink_.emit({"action", "-", f});
    };
    try {
        if (a.action == "initiate") {
            std::optional<SessionId> parent;
            if (has("parent")) {
                parent = session_at(arg("parent"));
                if (!parent) return false;
            }
            auto sid = o.request_collaboration(identity(arg("identity")), UserId(arg("responder")),
                                               has("intent") ? arg("intent") : std::string(), parent);
            note({{"session", sid.str()}});
        } else if (a.action == "approve" || a.action == "reject") {
            auto pending = o.pending_approvals(UserId(arg("owner")));
            std::optional<SessionId> only;
            if (has("session")) {
                only = session_at(arg("session"));
                if (!only) return false;
            }
            for (const auto& req : pending) {
                if (has("role") && to_string(req.role) != arg("role")) continue;
                if (only && req.session != *only) continue;
                auto state = o.resolve_approval(req.request_id, req.approver,
                                                a.action == "approve" ? orchestrator::Decision::approve
                                                                      : orchestrator::Decision::reject);
                note({{"request", req.request_id}, {"state", std::string(orchestrator::to_string(state))}});
                return true;
            }
            return false;
        } else if (a.action == "abort") {
            auto sid = session_at(arg("session"));
            if (!sid) return false;
            auto s = o.session(*sid);
            if (has("after_turns") && s->state == orchestrator::SessionState::Active &&
                s->turn_count < std::stoul(arg("after_turns")))
                return false;
            o.abort_session(UserId(arg("owner")), *sid);
            note({{"session", sid->str()}});
        } else if (a.action == "rollback" || a.action == "undo") {
            auto res = a.action == "rollback" ? o.node_rollback(UserId(arg("owner")), std::stoull(arg("to_seq")))
                                              : o.node_undo(UserId(arg("owner")), std::stoul(arg("count")));
            note({{"result", std::string(governance::to_string(res.result))},
                  {"entries", std::to_string(res.entries.size())}});
        } else if (a.action == "send") {
            std::string to = arg("to");
            if (to.rfind("manager:", 0) == 0) to = to.substr(8) + "/@manager";
            else if (aliases_.count(to)) to = identity(to).str();
            orchestrator::Envelope env{identity(arg("from")), to, std::nullopt, has("body") ? arg("body") : ""};
            if (has("session")) env.session = session_at(arg("session"));
            auto r = o.route(env);
            note({{"status", std::string(orchestrator::to_string(r.status))}});
        } else if (a.action == "retire") {
            auto receipt = o.retire_identity(UserId(arg("owner")), identity(arg("identity")));
            note({{"terminated", std::to_string(receipt.terminated_sessions.size())}});
        } else if (a.action == "remove_contact") {
            o.remove_contact(UserId(arg("a")), UserId(arg("b")));
            note({});
        } else if (a.action == "directive") {
            governance::Operation op;
            auto kind = governance::parse_op_kind(arg("op"));
            if (!kind) fail(Errc::ScenarioParseError, "unknown op " + arg("op"));
            op.kind = *kind;
            op.targets = a.list;
            op.issuer = identity(arg("identity"));
            std::string content = has("content") ? arg("content") : "";
            if (op.kind == governance::OpKind::write) op.payload_digest = sha256_hex(content);
            auto r = o.proxy_directive(op, content);
            Fields extra{{"result", std::string(governance::to_string(r.result))}};
            if (r.deny_reason) extra.emplace_back("reason", std::string(governance::to_string(*r.deny_reason)));
            note(extra);
        } else {
            fail(Errc::ScenarioParseError, "unsupported action " + a.action);
        }
    } catch (const Error& e) {
        if (e.code() == Errc::ScenarioParseError) throw;
        note({{"error", std::string(to_string(e.code()))}});
    }
    return true;
}

RunReport Simulator::run() {
    setup();
    RunReport report;
    std::vector<bool> done(scenario_.actions.size(), false);
    std::int64_t tick = 0;
    for (; tick <= scenario_.settings.tick_limit; ++tick) {
        clock_.set_tick(tick);
        for (std::size_t i = 0; i < scenario_.actions.size(); ++i)
            if (!done[i] && scenario_.actions[i].at <= tick) done[i] = apply(scenario_.actions[i]);
        orch_->expire_approvals();
        auto advanced = orch_->step_all();
        bool actions_left = std::find(done.begin(), done.end(), false) != done.end();
        if (!actions_left && advanced == 0 && orch_->pending_approvals().empty()) {
            report.quiescent = true;
            break;
        }
    }
    report.ticks = std::min(tick, scenario_.settings.tick_limit);
    sink_.emit({"end", "-", {{"ticks", std::to_string(report.ticks)}, {"quiescent", report.quiescent ? "1" : "0"}}});
    report.trace = trace();
    report.failures = evaluate(report.trace);
    return report;
}

std::vector<fs::path> Simulator::log_files() const {
    std::vector<fs::path> out;
    auto audit = sandbox_ / "server" / "audit";
    if (fs::exists(audit))
        for (const auto& e : fs::directory_iterator(audit)) out.push_back(e.path());
    for (const auto& [owner, ep] : nodes_)
        if (ep->audit().file()) out.push_back(*ep->audit().file());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> Simulator::verify_logs() const {
    std::vector<std::string> out;
    for (const auto& f : log_files()) {
        auto st = governance::verify_file(f);
        if (!st.ok) out.push_back("chain broken at seq " + std::to_string(st.broken_at) + " in " + f.string());
    }
    return out;
}

std::vector<std::string> Simulator::reconcile() const {
    std::vector<std::string> out;
    auto mutative_action = [](const std::string& action) {
        auto k = governance::parse_op_kind(action);
        return k && governance::is_mutative(*k);
    };
    std::size_t denied_l1 = 0, denied_l2 = 0;
    for (const auto& owner : orch_->users()) {
        std::size_t server_exec = 0;
        for (const auto& r : orch_->governance().log(owner).records()) {
            if (r.result == AuditResult::denied_l1) ++denied_l1;
            if (r.result == AuditResult::denied_l2) ++denied_l2;
            if (r.result == AuditResult::allowed_executed && mutative_action(r.action)) ++server_exec;
        }
        std::size_t node_exec = 0;
        auto it = nodes_.find(owner.str());
        if (it != nodes_.end()) {
            for (const auto& r : it->second->audit().records())
                if (r.result == AuditResult::allowed_executed && mutative_action(r.action) && !r.ext_value("reverts"))
                    ++node_exec;
        }
        if (server_exec != node_exec)
            out.push_back(owner.str() + ": " + std::to_string(server_exec) + " executed mutative directives but " +
                          std::to_string(node_exec) + " allowed_executed node records");
    }
    std::size_t esc_l1 = 0, esc_l2 = 0;
    for (const auto& e : orch_->governance().events().all()) {
        if (e.layer == governance::ViolatedLayer::L1) ++esc_l1;
        if (e.layer == governance::ViolatedLayer::L2) ++esc_l2;
    }
    if (denied_l1 != esc_l1)
        out.push_back(std::to_string(denied_l1) + " L1 denials but " + std::to_string(esc_l1) + " L1 escalations");
    if (denied_l2 != esc_l2)
        out.push_back(std::to_string(denied_l2) + " L2 denials but " + std::to_string(esc_l2) + " L2 escalations");
    return out;
}

std::vector<std::string> Simulator::evaluate(const EventTrace& trace) {
    std::vector<std::string> failures;
    const auto& ex = scenario_.expect;
    auto sessions = orch_->sessions();

    if (ex.session_count && sessions.size() != *ex.session_count)
        failures.push_back("expected " + std::to_string(*ex.session_count) + " sessions, got " +
                           std::to_string(sessions.size()));
    for (const auto& se : ex.sessions) {
        if (se.index >= sessions.size()) {
            failures.push_back("session " + std::to_string(se.index) + " does not exist");
            continue;
        }
        const auto& s = sessions[se.index];
        auto name = "session " + std::to_string(se.index) + " (" + s.id.str() + ")";
        if (se.state && *se.state != orchestrator::to_string(s.state))
            failures.push_back(name + ": state " + std::string(orchestrator::to_string(s.state)) + ", expected " + *se.state);
        if (se.reason) {
            auto got = s.reason ? std::string(orchestrator::to_string(*s.reason)) : std::string("none");
            if (got != *se.reason) failures.push_back(name + ": reason " + got + ", expected " + *se.reason);
        }
        if (se.turns && *se.turns != s.turn_count)
            failures.push_back(name + ": " + std::to_string(s.turn_count) + " turns, expected " + std::to_string(*se.turns));
        if (se.depth && *se.depth != s.depth)
            failures.push_back(name + ": depth " + std::to_string(s.depth) + ", expected " + std::to_string(*se.depth));
    }

    std::map<std::string, std::size_t> esc;
    for (const auto& e : orch_->governance().events().all()) ++esc[std::string(governance::to_string(e.layer))];
    for (const auto& [layer, n] : ex.escalations)
        if (esc[layer] != n)
            failures.push_back("escalations[" + layer + "] = " + std::to_string(esc[layer]) + ", expected " +
                               std::to_string(n));

    if (ex.manager_deliveries && orch_->total_manager_deliveries() != *ex.manager_deliveries)
        failures.push_back("manager deliveries = " + std::to_string(orch_->total_manager_deliveries()) +
                           ", expected " + std::to_string(*ex.manager_deliveries));

    for (const auto& [status, n] : ex.routes) {
        auto got = trace.find("route", {{"status", status}}).size();
        if (got != n)
            failures.push_back("routes[" + status + "] = " + std::to_string(got) + ", expected " + std::to_string(n));
    }
    for (const auto& [user, n] : ex.policy_invocations) {
        auto got = orch_->policy_invocations(UserId(user));
        if (got != n)
            failures.push_back("policy invocations for " + user + " = " + std::to_string(got) + ", expected " +
                               std::to_string(n));
    }

    std::set<std::string> users;
    for (const auto& u : scenario_.users) users.insert(u.id);
    for (const auto& marker : ex.forbid_cross_boundary) {
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const auto& e = trace.events()[i];
            if (e.kind != "frame") continue;
            auto src = field(e.fields, "src").value_or(""), dst = field(e.fields, "dst").value_or("");
            if (!users.count(src) || !users.count(dst) || src == dst) continue;
            for (const auto& [k, v] : e.fields)
                if (v.find(marker) != std::string::npos)
                    failures.push_back("marker '" + marker + "' crossed " + src + " -> " + dst + " at event " +
                                       std::to_string(i));
        }
    }

    for (const auto& seq : ex.order) {
        std::size_t from = 0;
        for (const auto& p : seq) {
            std::size_t i = from;
            while (i < trace.size() && !matches(trace.events()[i], p)) ++i;
            if (i == trace.size()) {
                failures.push_back("order: no " + describe(p) + " after event " + std::to_string(from));
                break;
            }
            from = i + 1;
        }
    }
    for (const auto& p : ex.present) {
        bool found = std::any_of(trace.events().begin(), trace.events().end(),
                                 [&](const TraceEvent& e) { return matches(e, p); });
        if (!found) failures.push_back("missing event " + describe(p));
    }
    for (const auto& p : ex.absent) {
        for (std::size_t i = 0; i < trace.size(); ++i)
            if (matches(trace.events()[i], p)) failures.push_back("unexpected event " + describe(p) + " at " + std::to_string(i));
    }

    for (const auto& t : ex.trees) {
        auto now = node::tree_hash(physical(t.owner, t.path));
        if (t.hash && now != *t.hash)
            failures.push_back("tree " + t.owner + ":" + t.path + " hash " + now + ", expected " + *t.hash);
        if (t.initial && now != initial_trees_[{t.owner, t.path}])
            failures.push_back("tree " + t.owner + ":" + t.path + " differs from its initial state");
    }

    if (ex.reconcile)
        for (auto& m : reconcile()) failures.push_back("reconcile: " + m);
    if (ex.chains_verify)
        for (auto& m : verify_logs()) failures.push_back(m);
    return failures;
}

RunReport run_scenario(const fs::path& file, SimOptions options) {
    Simulator sim(load_scenario(file), std::move(options));
    return sim.run();
}

}  // namespace clawnet::harness

#include "clawnet/common/error.hpp"
#include "clawnet/governance/audit.hpp"
#include "clawnet/net/node_transport.hpp"
#include "clawnet/server/server.hpp"

#include <httplib.h>
#include <json.hpp>

#include <csignal>
#include <iostream>

namespace clawnet::server {

using json = nlohmann::json;
using orchestrator::Orchestrator;

// -- event hub ---------------------------------------------------------------

std::optional<PushEvent> EventHub::Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    auto ev = std::move(queue_.front());
    queue_.pop_front();
    return ev;
}

bool EventHub::Subscription::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

namespace {

json fields_json(const Fields& f, std::string_view strip_prefix = {}) {
    json j = json::object();
    for (const auto& [k, v] : f) {
        std::string key = k;
        if (!strip_prefix.empty()) {
            if (key.rfind(strip_prefix, 0) != 0) continue;
            key = key.substr(strip_prefix.size());
        }
        if (j.contains(key)) {
            if (!j[key].is_array()) j[key] = json::array({j[key]});
            j[key].push_back(v);
        } else {
            j[key] = v;
        }
    }
    return j;
}

}  // namespace

void EventHub::emit(TraceEvent event) {
    if (event.kind == "frame" && field(event.fields, "frame") == "APPROVAL_EVENT") {
        auto data = fields_json(event.fields, "b.");
        data["session"] = field(event.fields, "session").value_or("");
        publish(UserId(field(event.fields, "dst").value_or("")), "approval", data.dump());
    } else if (event.kind == "escalation") {
        publish(UserId(field(event.fields, "owner").value_or("")), "escalation", fields_json(event.fields).dump());
    } else if (event.kind == "session") {
        auto data = fields_json(event.fields).dump();
        auto a = IdentityId(field(event.fields, "initiator").value_or("")).owner();
        auto b = IdentityId(field(event.fields, "responder").value_or("")).owner();
        publish(a, "session", data);
        if (b != a) publish(b, "session", data);
    }
    if (forward_) forward_->emit(std::move(event));
}

void EventHub::publish(const UserId& owner, const std::string& type, const std::string& data) {
    std::lock_guard lock(mu_);
    PushEvent ev{next_id_++, type, data};
    for (const auto& s : subs_) {
        if (s->owner_ != owner) continue;
        {
            std::lock_guard sl(s->mu_);
            s->queue_.push_back(ev);
        }
        s->cv_.notify_all();
    }
}

std::shared_ptr<EventHub::Subscription> EventHub::subscribe(const UserId& owner) {
    auto s = std::make_shared<Subscription>();
    s->owner_ = owner;
    std::lock_guard lock(mu_);
    subs_.push_back(s);
    return s;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& sub) {
    std::lock_guard lock(mu_);
    subs_.erase(std::remove(subs_.begin(), subs_.end(), sub), subs_.end());
}

void EventHub::close() {
    std::lock_guard lock(mu_);
    for (const auto& s : subs_) {
        {
            std::lock_guard sl(s->mu_);
            s->closed_ = true;
        }
        s->cv_.notify_all();
    }
}

std::size_t EventHub::subscribers() const {
    std::lock_guard lock(mu_);
    return subs_.size();
}

// -- JSON views ----------------------------------------------------------------

namespace {

json to_json(const orchestrator::ApprovalRequest& r) {
    return {{"request", r.request_id},
            {"session", r.session.str()},
            {"approver", r.approver.str()},
            {"role", orchestrator::to_string(r.role)},
            {"summary", r.summary},
            {"state", orchestrator::to_string(r.state)},
            {"created", format_utc(r.created)},
            {"deadline", format_utc(r.deadline)}};
}

json to_json(const governance::EscalationEvent& e) {
    return {{"event", e.event_id},
            {"owner", e.owner.str()},
            {"identity", e.identity.str()},
            {"layer", governance::to_string(e.layer)},
            {"action", e.action},
            {"targets", e.targets},
            {"session", e.session ? e.session->str() : ""},
            {"reason", e.reason},
            {"ts", format_utc(e.timestamp)},
            {"acknowledged", e.acknowledged}};
}

json to_json(const governance::AuditRecord& r) {
    json ext = json::object();
    for (const auto& [k, v] : r.ext) ext[k] = v;
    return {{"seq", r.seq},
            {"action", r.action},
            {"targets", r.targets},
            {"owner", r.owner.str()},
            {"identity", r.identity.str()},
            {"session", r.session ? r.session->str() : ""},
            {"digest", r.payload_digest},
            {"result", governance::to_string(r.result)},
            {"ts", format_utc(r.timestamp)},
            {"ext", ext},
            {"prev", to_hex(r.prev_hash)},
            {"hash", to_hex(r.record_hash)},
            {"line", r.to_line()}};
}

json to_json(const identity::IdentityAgent& a) {
    json grants = json::array();
    for (const auto& g : a.scope.grants()) grants.push_back({{"prefix", g.prefix}, {"class", identity::to_string(g.op_class)}});
    json peers = json::array();
    for (const auto& p : a.permitted_peers) peers.push_back(p.str());
    return {{"id", a.id.str()},
            {"owner", a.owner.str()},
            {"tag", a.context_tag},
            {"scope", grants},
            {"memory_ns", a.memory_ns},
            {"peers", peers},
            {"status", a.active() ? "active" : "retired"}};
}

json to_json(const orchestrator::CollaborationSession& s) {
    json transcript = json::array();
    for (const auto& t : s.transcript)
        transcript.push_back({{"speaker", t.speaker.str()},
                              {"content", t.content},
                              {"intent", fields_json(t.intent)},
                              {"end", t.end_marker},
                              {"ts", format_utc(t.timestamp)}});
    auto party = [](const orchestrator::Party& p) { return json{{"user", p.user.str()}, {"identity", p.identity.str()}}; };
    return {{"id", s.id.str()},
            {"state", orchestrator::to_string(s.state)},
            {"reason", s.reason ? std::string(orchestrator::to_string(*s.reason)) : ""},
            {"initiator", party(s.initiator)},
            {"responder", party(s.responder)},
            {"intent", s.intent},
            {"turns", s.turn_count},
            {"max_turns", s.max_turns},
            {"depth", s.depth},
            {"parent", s.chain_parent ? s.chain_parent->str() : ""},
            {"transcript", transcript}};
}

json to_json(const wire::DirectiveResult& r) {
    auto rep = restore_report_from_entries(r.entries);
    json reversed = json::array(), skipped = json::array();
    for (const auto& x : rep.reversed) reversed.push_back({{"seq", x.seq}, {"action", x.action}});
    for (const auto& x : rep.skipped)
        skipped.push_back({{"seq", x.seq}, {"reason", to_string(x.reason)}, {"detail", x.detail}});
    json j{{"result", governance::to_string(r.result)}, {"reversed", reversed}, {"skipped", skipped}};
    if (r.error) j["error"] = to_string(*r.error);
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

int status_for(Errc c) {
    switch (c) {
        case Errc::NotFound:
        case Errc::UnknownUser:
        case Errc::UnknownOwner:
        case Errc::UnknownIdentity:
        case Errc::UnknownSession:
        case Errc::UnknownRequest:
        case Errc::UnknownDestination:
            return 404;
        case Errc::NotOwner:
        case Errc::NotApprover:
        case Errc::ForeignNamespace:
            return 403;
        case Errc::AlreadyResolved:
        case Errc::AlreadyRetired:
        case Errc::AlreadyExists:
        case Errc::DuplicateContact:
        case Errc::DuplicateNode:
        case Errc::InvalidState:
            return 409;
        case Errc::Expired:
            return 410;
        case Errc::NodeUnavailable:
            return 503;
        case Errc::Timeout:
            return 504;
        case Errc::StorageFailure:
            return 500;
        default:
            return 422;
    }
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
    res.status = status;
    res.set_content(json{{"error", code}, {"detail", detail}}.dump(), "application/json");
}

void send(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

bool participates(const orchestrator::CollaborationSession& s, const UserId& u) {
    return s.initiator.user == u || s.responder.user == u;
}

}  // namespace

// -- console -------------------------------------------------------------------

struct ConsoleServer::Impl {
    Orchestrator& orch;
    EventHub& hub;
    std::map<std::string, UserId> tokens;
    httplib::Server http;
    std::thread thread;

    Impl(Orchestrator& o, EventHub& h, std::map<std::string, UserId> t) : orch(o), hub(h), tokens(std::move(t)) {}

    std::optional<UserId> owner_of(const httplib::Request& req) const {
        auto h = req.get_header_value("Authorization");
        const std::string prefix = "Bearer ";
        std::string token;
        if (h.rfind(prefix, 0) == 0) token = h.substr(prefix.size());
        else if (req.has_param("token")) token = req.get_param_value("token");  // EventSource cannot set headers
        auto it = tokens.find(token);
        if (token.empty() || it == tokens.end()) return std::nullopt;
        return it->second;
    }

    using Handler = std::function<void(const UserId&, const httplib::Request&, httplib::Response&)>;

    httplib::Server::Handler guarded(Handler h) {
        return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            auto owner = owner_of(req);
            if (!owner) return send_error(res, 401, "Unauthorized", "missing or unknown bearer token");
            try {
                h(*owner, req, res);
            } catch (const Error& e) {
                send_error(res, status_for(e.code()), to_string(e.code()), e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "InvalidArgument", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "Internal", e.what());
            }
        };
    }

    static json body(const httplib::Request& req) { return req.body.empty() ? json::object() : json::parse(req.body); }

    orchestrator::CollaborationSession visible_session(const UserId& owner, const std::string& id) {
        auto s = orch.session(SessionId(id));
        if (!s) fail(Errc::UnknownSession, "no session " + id);
        if (!participates(*s, owner)) fail(Errc::NotOwner, "session " + id + " has no " + owner.str() + " side");
        return *s;
    }

    identity::IdentityAgent own_identity(const UserId& owner, const std::string& id) {
        auto a = orch.find_identity(IdentityId(id));
        if (!a) fail(Errc::UnknownIdentity, "no identity " + id);
        if (a->owner != owner) fail(Errc::NotOwner, id + " belongs to another owner");
        return *a;
    }

    void mount() {
        auto& s = http;
        s.Get("/api/v1/whoami", guarded([](const UserId& u, const auto&, auto& res) { send(res, {{"owner", u.str()}}); }));

        // approvals
        s.Get("/api/v1/approvals", guarded([this](const UserId& u, const auto&, auto& res) {
                  json out = json::array();
                  for (const auto& r : orch.pending_approvals(u)) out.push_back(to_json(r));
                  send(res, out);
              }));
        s.Get(R"(/api/v1/approvals/([^/]+))", guarded([this](const UserId& u, const auto& req, auto& res) {
                  auto r = orch.approval(req.matches[1]);
                  if (!r) fail(Errc::UnknownRequest, "no request " + std::string(req.matches[1]));
                  if (r->approver != u) fail(Errc::NotApprover, "request belongs to another owner");
                  send(res, to_json(*r));
              }));
        s.Post(R"(/api/v1/approvals/([^/]+))", guarded([this](const UserId& u, const auto& req, auto& res) {
                   auto d = body(req).at("decision").template get<std::string>();
                   if (d != "approve" && d != "reject") fail(Errc::InvalidArgument, "decision must be approve or reject");
                   auto state = orch.resolve_approval(req.matches[1], u,
                                                      d == "approve" ? orchestrator::Decision::approve
                                                                     : orchestrator::Decision::reject);
                   auto r = orch.approval(req.matches[1]);
                   send(res, {{"request", std::string(req.matches[1])},
                              {"state", r ? std::string(orchestrator::to_string(r->state)) : ""},
                              {"session_state", orchestrator::to_string(state)}});
               }));

        // security event center
        s.Get("/api/v1/escalations", guarded([this](const UserId& u, const auto&, auto& res) {
                  json out = json::array();
                  for (const auto& e : orch.governance().events().feed(u)) out.push_back(to_json(e));
                  send(res, out);
              }));
        s.Post(R"(/api/v1/escalations/([^/]+)/ack)", guarded([this](const UserId& u, const auto& req, auto& res) {
                   send(res, to_json(orch.governance().events().acknowledge(u, req.matches[1])));
               }));

        // audit
        s.Get("/api/v1/audit", guarded([this](const UserId& u, const auto& req, auto& res) {
                  if (req.has_param("owner") && req.get_param_value("owner") != u.str())
                      fail(Errc::NotOwner, "audit logs are readable by their owner only");
                  std::uint64_t since = req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
                  std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : 100;
                  auto& log = orch.governance().log(u);
                  json records = json::array();
                  for (const auto& r : log.page(since, limit)) records.push_back(to_json(r));
                  send(res, {{"owner", u.str()}, {"size", log.size()}, {"records", records}});
              }));
        s.Get("/api/v1/audit/verify", guarded([this](const UserId& u, const auto& req, auto& res) {
                  if (req.has_param("owner") && req.get_param_value("owner") != u.str())
                      fail(Errc::NotOwner, "audit logs are readable by their owner only");
                  auto& log = orch.governance().log(u);
                  auto st = log.file() ? governance::verify_file(*log.file()) : log.verify();
                  json j{{"ok", st.ok}};
                  if (!st.ok) j["broken_at"] = st.broken_at;
                  send(res, j);
              }));

        // sessions
        s.Get("/api/v1/sessions", guarded([this](const UserId& u, const auto&, auto& res) {
                  json out = json::array();
                  for (const auto& x : orch.sessions())
                      if (participates(x, u)) out.push_back(to_json(x));
                  send(res, out);
              }));
        s.Get(R"(/api/v1/sessions/([^/]+))", guarded([this](const UserId& u, const auto& req, auto& res) {
                  send(res, to_json(visible_session(u, req.matches[1])));
              }));
        s.Post("/api/v1/sessions", guarded([this](const UserId& u, const auto& req, auto& res) {
                   auto b = body(req);
                   auto id = b.at("identity").template get<std::string>();
                   own_identity(u, id);
                   std::optional<SessionId> parent;
                   if (b.contains("parent")) parent = SessionId(b["parent"].template get<std::string>());
                   auto sid = orch.request_collaboration(IdentityId(id), UserId(b.at("responder").template get<std::string>()),
                                                         b.value("intent", std::string()), parent);
                   send(res, to_json(*orch.session(sid)), 201);
               }));
        s.Post(R"(/api/v1/sessions/([^/]+)/abort)", guarded([this](const UserId& u, const auto& req, auto& res) {
                   visible_session(u, req.matches[1]);
                   orch.abort_session(u, SessionId(req.matches[1]));
                   send(res, to_json(*orch.session(SessionId(req.matches[1]))));
               }));

        // identities
        s.Get("/api/v1/identities", guarded([this](const UserId& u, const auto&, auto& res) {
                  json out = json::array();
                  for (const auto& a : orch.identities_of(u)) out.push_back(to_json(a));
                  send(res, out);
              }));
        s.Post("/api/v1/identities", guarded([this](const UserId& u, const auto& req, auto& res) {
                   auto b = body(req);
                   std::set<UserId> peers;
                   for (const auto& p : b.value("peers", json::array())) peers.insert(UserId(p.template get<std::string>()));
                   auto a = orch.create_identity(u, b.at("tag").template get<std::string>(), scope_from(b), peers);
                   send(res, to_json(a), 201);
               }));
        s.Post(R"(/api/v1/identities/(.+)/retire)", guarded([this](const UserId& u, const auto& req, auto& res) {
                   auto r = orch.retire_identity(u, IdentityId(req.matches[1]));
                   json ended = json::array();
                   for (const auto& x : r.terminated_sessions) ended.push_back(x.str());
                   send(res, {{"id", r.id.str()}, {"terminated_sessions", ended}, {"retired_at", format_utc(r.retired_at)}});
               }));
        s.Put(R"(/api/v1/identities/(.+)/scope)", guarded([this](const UserId& u, const auto& req, auto& res) {
                  send(res, to_json(orch.update_scope(u, IdentityId(req.matches[1]), scope_from(body(req)))));
              }));
        s.Put(R"(/api/v1/identities/(.+)/peers)", guarded([this](const UserId& u, const auto& req, auto& res) {
                  std::set<UserId> peers;
                  for (const auto& p : body(req).at("peers")) peers.insert(UserId(p.template get<std::string>()));
                  send(res, to_json(orch.update_peers(u, IdentityId(req.matches[1]), peers)));
              }));
        s.Get(R"(/api/v1/identities/(.+)/memory)", guarded([this](const UserId& u, const auto& req, auto& res) {
                  own_identity(u, req.matches[1]);
                  json out = json::array();
                  for (const auto& e : orch.runtime(u).recall(u.str(), IdentityId(req.matches[1])))
                      out.push_back({{"layer", runtime::to_string(e.layer)},
                                     {"key", e.key},
                                     {"value", e.value},
                                     {"created", format_utc(e.created)},
                                     {"updated", format_utc(e.updated)}});
                  send(res, out);
              }));
        s.Post(R"(/api/v1/identities/(.+)/memory)", guarded([this](const UserId& u, const auto& req, auto& res) {
                   own_identity(u, req.matches[1]);
                   auto b = body(req);
                   auto layer = runtime::parse_memory_layer(b.value("layer", std::string("factual")));
                   if (!layer) fail(Errc::InvalidArgument, "unknown memory layer");
                   auto e = orch.runtime(u).remember(u.str(), IdentityId(req.matches[1]), *layer,
                                                     b.at("key").template get<std::string>(),
                                                     b.at("value").template get<std::string>());
                   send(res, {{"layer", runtime::to_string(e.layer)}, {"key", e.key}, {"value", e.value}}, 201);
               }));

        // contacts
        s.Get("/api/v1/contacts", guarded([this](const UserId& u, const auto&, auto& res) {
                  auto user = orch.find_user(u);
                  json out = json::array();
                  if (user)
                      for (const auto& [peer, c] : user->contacts)
                          out.push_back({{"peer", peer.str()},
                                         {"state", identity::to_string(c.state)},
                                         {"presented_identity", c.presented_identity ? c.presented_identity->str() : ""}});
                  send(res, out);
              }));
        s.Post("/api/v1/contacts", guarded([this](const UserId& u, const auto& req, auto& res) {
                   orch.request_contact(u, UserId(body(req).at("peer").template get<std::string>()));
                   send(res, {{"state", "pending_out"}}, 201);
               }));
        s.Post(R"(/api/v1/contacts/([^/]+)/confirm)", guarded([this](const UserId& u, const auto& req, auto& res) {
                   orch.confirm_contact(u, UserId(req.matches[1]));
                   send(res, {{"state", "confirmed"}});
               }));
        s.Put(R"(/api/v1/contacts/([^/]+)/identity)", guarded([this](const UserId& u, const auto& req, auto& res) {
                  auto c = orch.assign_contact_identity(u, UserId(req.matches[1]),
                                                        IdentityId(body(req).at("identity").template get<std::string>()));
                  send(res, {{"peer", c.peer.str()},
                             {"state", identity::to_string(c.state)},
                             {"presented_identity", c.presented_identity ? c.presented_identity->str() : ""}});
              }));
        s.Delete(R"(/api/v1/contacts/([^/]+))", guarded([this](const UserId& u, const auto& req, auto& res) {
                     orch.remove_contact(u, UserId(req.matches[1]));
                     send(res, {{"removed", std::string(req.matches[1])}});
                 }));

        // node
        s.Get("/api/v1/node", guarded([this](const UserId& u, const auto&, auto& res) {
                  auto n = orch.node_of(u);
                  send(res, {{"node", n ? n->str() : ""}, {"connected", n.has_value()}});
              }));
        s.Post("/api/v1/node/undo", guarded([this](const UserId& u, const auto& req, auto& res) {
                   auto count = body(req).value("count", std::size_t{1});
                   send(res, to_json(orch.node_undo(u, count)));
               }));
        s.Post("/api/v1/node/rollback", guarded([this](const UserId& u, const auto& req, auto& res) {
                   auto to = body(req).at("to_seq").template get<std::uint64_t>();
                   send(res, to_json(orch.node_rollback(u, to)));
               }));

        // server push
        s.Get("/api/v1/events", guarded([this](const UserId& u, const auto&, httplib::Response& res) {
                  auto sub = hub.subscribe(u);
                  res.set_header("Cache-Control", "no-cache");
                  res.set_chunked_content_provider(
                      "text/event-stream",
                      [sub](std::size_t, httplib::DataSink& sink) {
                          if (sub->closed()) return false;
                          auto ev = sub->next(std::chrono::milliseconds(1000));
                          std::string chunk = ev ? "id: " + std::to_string(ev->id) + "\nevent: " + ev->type +
                                                       "\ndata: " + ev->data + "\n\n"
                                                 : std::string(": keepalive\n\n");
                          return sink.write(chunk.data(), chunk.size());
                      },
                      [this, sub](bool) { hub.unsubscribe(sub); });
              }));
    }

    static identity::AuthorizationScope scope_from(const json& b) {
        std::vector<identity::Grant> grants;
        for (const auto& g : b.value("scope", json::array())) {
            auto cls = identity::parse_op_class(g.at("class").get<std::string>());
            if (!cls) fail(Errc::InvalidArgument, "unknown operation class");
            grants.push_back({g.at("prefix").get<std::string>(), *cls});
        }
        return identity::AuthorizationScope(std::move(grants));
    }
};

ConsoleServer::ConsoleServer(Orchestrator& orch, EventHub& hub, std::map<std::string, UserId> tokens)
    : impl_(std::make_unique<Impl>(orch, hub, std::move(tokens))) {
    impl_->http.new_task_queue = [] { return new httplib::ThreadPool(16); };
    impl_->mount();
}

ConsoleServer::~ConsoleServer() { stop(); }

std::uint16_t ConsoleServer::start(const std::string& host, std::uint16_t port) {
    int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) fail(Errc::StorageFailure, "console cannot bind " + host + ":" + std::to_string(port));
    port_ = static_cast<std::uint16_t>(bound);
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return port_;
}

void ConsoleServer::stop() {
    if (!impl_) return;
    impl_->hub.close();
    impl_->http.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

node::RestoreReport restore_report_from_entries(const std::vector<std::string>& entries) {
    node::RestoreReport rep;
    for (const auto& e : entries) {
        auto a = e.find(':');
        auto b = a == std::string::npos ? a : e.find(':', a + 1);
        if (b == std::string::npos) continue;
        auto kind = e.substr(0, a);
        std::uint64_t seq = 0;
        try {
            seq = std::stoull(e.substr(a + 1, b - a - 1));
        } catch (const std::exception&) {
            continue;
        }
        auto rest = e.substr(b + 1);
        if (kind == "reversed") {
            rep.reversed.push_back({seq, rest, {}});
        } else if (kind == "skipped") {
            auto c = rest.find(':');
            auto code = parse_errc(rest.substr(0, c));
            rep.skipped.push_back({seq, code.value_or(Errc::ExecFailure), c == std::string::npos ? "" : rest.substr(c + 1)});
        }
    }
    return rep;
}

node::RestoreReport remote_node_restore(const std::string& base_url, const std::string& token, bool undo,
                                        std::uint64_t arg) {
    httplib::Client cli(base_url);
    cli.set_read_timeout(30, 0);
    httplib::Headers h{{"Authorization", "Bearer " + token}};
    json b = undo ? json{{"count", arg}} : json{{"to_seq", arg}};
    auto res = cli.Post(undo ? "/api/v1/node/undo" : "/api/v1/node/rollback", h, b.dump(), "application/json");
    if (!res) fail(Errc::NodeUnavailable, "cannot reach " + base_url);
    auto j = json::parse(res->body, nullptr, false);
    if (res->status != 200) {
        auto code = j.is_object() ? parse_errc(j.value("error", "")) : std::nullopt;
        fail(code.value_or(Errc::ProtocolError), j.is_object() ? j.value("detail", res->body) : res->body);
    }
    node::RestoreReport rep;
    for (const auto& x : j.at("reversed")) rep.reversed.push_back({x.at("seq").get<std::uint64_t>(), x.at("action").get<std::string>(), {}});
    for (const auto& x : j.at("skipped"))
        rep.skipped.push_back({x.at("seq").get<std::uint64_t>(), parse_errc(x.at("reason").get<std::string>()).value_or(Errc::ExecFailure),
                               x.at("detail").get<std::string>()});
    if (j.contains("error")) fail(parse_errc(j["error"].get<std::string>()).value_or(Errc::ProtocolError), j.value("detail", ""));
    return rep;
}

// -- server --------------------------------------------------------------------

const Clock& Server::default_clock() {
    static SystemClock clock;
    return clock;
}

Server::Server(ServerConfig config, const Clock& clock) : config_(std::move(config)), clock_(clock), ids_(1) {
    orchestrator::Settings s;
    s.d_max = config_.d_max;
    s.max_turns = config_.max_turns;
    s.approval_deadline = config_.approval_deadline_s * 1000;
    s.node_timeout = std::chrono::milliseconds(config_.node_timeout_ms);
    s.state_dir = config_.state_dir;
    s.durable = config_.durable;
    orch_ = std::make_unique<Orchestrator>(clock_, ids_, hub_, s);
    for (const auto& u : config_.users) orch_->add_user(UserId(u.id), u.roots);
    for (const auto& x : config_.identities) {
        std::set<UserId> peers;
        for (const auto& p : x.peers) peers.insert(UserId(p));
        auto a = orch_->create_identity(UserId(x.owner), x.tag, identity::AuthorizationScope::parse(x.scope), peers);
        aliases_[x.alias] = a.id;
        if (x.policy == "echo") orch_->bind_policy(a.id, std::make_shared<runtime::EchoPolicy>(x.turns));
        else if (x.policy == "llm-adapter") orch_->bind_policy(a.id, std::make_shared<runtime::LlmAdapterPolicy>());
    }
    for (const auto& c : config_.contacts) {
        orch_->request_contact(UserId(c.a), UserId(c.b));
        orch_->confirm_contact(UserId(c.b), UserId(c.a));
        if (!c.a_presents.empty()) orch_->assign_contact_identity(UserId(c.a), UserId(c.b), identity(c.a_presents));
        if (!c.b_presents.empty()) orch_->assign_contact_identity(UserId(c.b), UserId(c.a), identity(c.b_presents));
    }
}

Server::~Server() { stop(); }

IdentityId Server::identity(const std::string& alias) const {
    auto it = aliases_.find(alias);
    if (it == aliases_.end()) fail(Errc::InvalidArgument, "unknown identity alias '" + alias + "'");
    return it->second;
}

void Server::start() {
    std::map<std::string, UserId> tokens;
    std::map<UserId, std::string> by_user;
    for (const auto& u : config_.users) {
        tokens[u.token] = UserId(u.id);
        by_user[UserId(u.id)] = u.token;
    }
    listener_ = std::make_unique<net::NodeListener>(*orch_, config_.host, config_.node_port,
                                                    [by_user](const wire::Frame& f) {
                                                        auto it = by_user.find(UserId(f.get("owner")));
                                                        return it != by_user.end() && it->second == f.get("token");
                                                    });
    console_ = std::make_unique<ConsoleServer>(*orch_, hub_, tokens);
    console_->start(config_.host, config_.console_port);
    {
        std::lock_guard lock(loop_mu_);
        running_ = true;
    }
    loop_thread_ = std::thread([this] { loop(); });
}

void Server::stop() {
    {
        std::lock_guard lock(loop_mu_);
        running_ = false;
    }
    loop_cv_.notify_all();
    if (loop_thread_.joinable()) loop_thread_.join();
    if (console_) console_->stop();
    if (listener_) listener_->stop();
}

std::uint16_t Server::node_port() const { return listener_ ? listener_->port() : 0; }
std::uint16_t Server::console_port() const { return console_ ? console_->port() : 0; }

void Server::loop() {
    std::unique_lock lock(loop_mu_);
    while (running_) {
        lock.unlock();
        try {
            orch_->expire_approvals();
            orch_->step_all();
        } catch (const std::exception& e) {
            std::cerr << "step: " << e.what() << "\n";
        }
        lock.lock();
        loop_cv_.wait_for(lock, std::chrono::milliseconds(config_.step_interval_ms), [&] { return !running_; });
    }
}

namespace {

int wait_for_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
    return sig;
}

void block_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

}  // namespace

int run_server(const std::filesystem::path& config) {
    block_signals();
    Server server(load_server_config(config));
    server.start();
    std::cout << "clawnet server: nodes on port " << server.node_port() << ", console on port "
              << server.console_port() << std::endl;
    wait_for_signal();
    server.stop();
    return 0;
}

int run_node(const node::NodeConfig& cfg) {
    block_signals();
    if (cfg.server_address.empty()) fail(Errc::InvalidArgument, "node config lacks 'server'");
    auto [host, port] = net::split_address(cfg.server_address);
    SystemClock clock;
    node::NodeEndpoint endpoint(cfg, clock);
    net::NodeClient client(endpoint, host, port);
    client.start();
    std::cout << "clawnet node " << cfg.node_id.str() << ": connecting to " << cfg.server_address << std::endl;
    wait_for_signal();
    client.stop();
    return 0;
}

}  // namespace clawnet::server

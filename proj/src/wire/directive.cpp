#include "clawnet/wire/directive.hpp"

namespace clawnet::wire {

using governance::AuditResult;

Frame to_frame(const Directive& d) {
    Frame f;
    f.kind = FrameKind::DIRECTIVE;
    f.msg_id = d.msg_id;
    f.session = d.op.session;
    f.issuer = d.op.issuer.str();
    f.set("op", std::string(governance::to_string(d.op.kind)));
    for (const auto& t : d.op.targets) f.set("target", t);
    f.set("digest", d.op.payload_digest);
    if (d.op.kind == governance::OpKind::write) f.set("content", d.content);
    return f;
}

Directive directive_from_frame(const Frame& f) {
    if (f.kind != FrameKind::DIRECTIVE) fail(Errc::ProtocolError, "expected DIRECTIVE frame");
    Directive d;
    d.msg_id = f.msg_id;
    auto kind = governance::parse_op_kind(f.get("op"));
    if (!kind) fail(Errc::ProtocolError, "unknown op '" + f.get("op") + "'");
    d.op.kind = *kind;
    d.op.issuer = IdentityId(f.issuer);
    d.op.session = f.session;
    for (const auto& [k, v] : f.body) {
        if (k == "target") d.op.targets.push_back(v);
        else if (k == "digest") d.op.payload_digest = v;
        else if (k == "content") d.content = v;
    }
    return d;
}

Frame to_frame(const DirectiveResult& r, const std::string& issuer, const std::optional<SessionId>& session) {
    Frame f;
    f.kind = FrameKind::DIRECTIVE_RESULT;
    f.msg_id = r.msg_id;
    f.session = session;
    f.issuer = issuer;
    f.set("result", std::string(governance::to_string(r.result)));
    if (r.deny_reason) f.set("reason", std::string(governance::to_string(*r.deny_reason)));
    if (r.error) f.set("error", std::string(to_string(*r.error)));
    if (!r.detail.empty()) f.set("detail", r.detail);
    if (!r.content.empty()) f.set("content", r.content);
    for (const auto& e : r.entries) f.set("entry", e);
    for (const auto& [k, v] : r.metadata) f.set("meta." + k, v);
    if (!r.backup_id.empty()) f.set("backup", r.backup_id);
    if (r.local_seq) f.set("local_seq", std::to_string(*r.local_seq));
    return f;
}

DirectiveResult result_from_frame(const Frame& f) {
    if (f.kind != FrameKind::DIRECTIVE_RESULT) fail(Errc::ProtocolError, "expected DIRECTIVE_RESULT frame");
    DirectiveResult r;
    r.msg_id = f.msg_id;
    auto res = governance::parse_audit_result(f.get("result"));
    if (!res) fail(Errc::ProtocolError, "unknown result '" + f.get("result") + "'");
    r.result = *res;
    for (const auto& [k, v] : f.body) {
        if (k == "reason") r.deny_reason = governance::parse_deny_reason(v);
        else if (k == "error") r.error = parse_errc(v);
        else if (k == "detail") r.detail = v;
        else if (k == "content") r.content = v;
        else if (k == "entry") r.entries.push_back(v);
        else if (k.rfind("meta.", 0) == 0) r.metadata.emplace_back(k.substr(5), v);
        else if (k == "backup") r.backup_id = v;
        else if (k == "local_seq") {
            try {
                r.local_seq = std::stoull(v);
            } catch (const std::exception&) {
                fail(Errc::ProtocolError, "bad local_seq");
            }
        }
    }
    return r;
}

}  // namespace clawnet::wire

#include "clawnet/governance/governance.hpp"

namespace clawnet::governance {

namespace {

std::optional<std::filesystem::path> events_dir(const std::optional<std::filesystem::path>& state) {
    if (!state) return std::nullopt;
    return *state / "events";
}

}  // namespace

Fields audit_trace_fields(const std::string& log_name, const AuditRecord& rec) {
    Fields f{{"log", log_name}};
    auto body = parse_canonical(rec.to_line());
    if (body) f.insert(f.end(), body->begin(), body->end());
    return f;
}

Governance::Governance(const Clock& clock, IdGenerator& ids, EventSink& sink,
                       std::optional<std::filesystem::path> state_dir, bool durable)
    : clock_(clock),
      ids_(ids),
      sink_(sink),
      state_dir_(std::move(state_dir)),
      durable_(durable),
      events_(events_dir(state_dir_)) {}

AuditLog& Governance::log(const UserId& owner) {
    std::lock_guard lock(mu_);
    auto& slot = logs_[owner];
    if (!slot) {
        slot = state_dir_ ? std::make_unique<AuditLog>(*state_dir_ / "audit" / (owner.str() + ".log"), durable_)
                          : std::make_unique<AuditLog>();
    }
    return *slot;
}

AuditRecord Governance::record(AuditEntry entry) {
    entry.timestamp = clock_.now_ms();
    AuditLog& target = log(entry.owner);
    AuditRecord rec = target.append(std::move(entry));
    sink_.emit({"audit", rec.session ? rec.session->str() : "-", audit_trace_fields(rec.owner.str(), rec)});
    return rec;
}

EscalationEvent Governance::escalate(const AuditEntry& attempted, ViolatedLayer layer, std::string reason) {
    EscalationEvent ev;
    ev.event_id = ids_.next("esc");
    ev.owner = attempted.owner;
    ev.identity = attempted.identity;
    ev.action = attempted.action;
    ev.targets = attempted.targets;
    ev.session = attempted.session;
    ev.layer = layer;
    ev.reason = std::move(reason);
    ev.timestamp = clock_.now_ms();
    events_.push(ev);
    sink_.emit({"escalation", ev.session ? ev.session->str() : "-", ev.to_fields()});

    AuditEntry entry = attempted;
    entry.result = AuditResult::escalated;
    entry.ext = {{"event", ev.event_id}, {"layer", std::string(to_string(layer))}, {"reason", ev.reason}};
    record(std::move(entry));
    return ev;
}

std::vector<UserId> Governance::owners_with_logs() const {
    std::lock_guard lock(mu_);
    std::vector<UserId> out;
    for (const auto& [owner, log] : logs_) out.push_back(owner);
    return out;
}

}  // namespace clawnet::governance

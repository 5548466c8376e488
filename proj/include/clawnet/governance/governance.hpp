#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/idgen.hpp"
#include "clawnet/common/trace_sink.hpp"
#include "clawnet/governance/audit.hpp"
#include "clawnet/governance/escalation.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace clawnet::governance {

/// Per-owner audit logs plus the security event center. With a state
/// directory, logs live at `<dir>/audit/<owner>.log` and escalations under
/// `<dir>/events/`.
class Governance {
public:
    Governance(const Clock& clock, IdGenerator& ids, EventSink& sink,
               std::optional<std::filesystem::path> state_dir = std::nullopt, bool durable = true);

    AuditLog& log(const UserId& owner);

    /// Appends to the owner's log, stamping the orchestrator clock.
    AuditRecord record(AuditEntry entry);

    /// Files a boundary-violation event for `attempted.owner` and appends a
    /// matching `escalated` record.
    EscalationEvent escalate(const AuditEntry& attempted, ViolatedLayer layer, std::string reason);

    SecurityEventCenter& events() noexcept { return events_; }
    const SecurityEventCenter& events() const noexcept { return events_; }

    std::vector<UserId> owners_with_logs() const;

private:
    const Clock& clock_;
    IdGenerator& ids_;
    EventSink& sink_;
    std::optional<std::filesystem::path> state_dir_;
    bool durable_;
    mutable std::mutex mu_;
    std::map<UserId, std::unique_ptr<AuditLog>> logs_;
    SecurityEventCenter events_;
};

/// Trace fields for an audit record (`log` first, then the record).
Fields audit_trace_fields(const std::string& log_name, const AuditRecord& rec);

}  // namespace clawnet::governance

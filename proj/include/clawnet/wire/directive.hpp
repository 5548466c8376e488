#pragma once

#include "clawnet/common/error.hpp"
#include "clawnet/governance/audit.hpp"
#include "clawnet/governance/decision.hpp"
#include "clawnet/governance/operation.hpp"
#include "clawnet/wire/frame.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clawnet::wire {

/// The cloud-to-edge file operation envelope.
struct Directive {
    std::string msg_id;
    governance::Operation op;
    /// Bytes to write; only meaningful for write.
    std::string content;
};

struct DirectiveResult {
    std::string msg_id;
    governance::AuditResult result = governance::AuditResult::failed_exec;
    std::optional<governance::DenyReason> deny_reason;
    std::optional<Errc> error;
    std::string detail;
    /// read: file bytes.
    std::string content;
    /// list: entry names, sorted.
    std::vector<std::string> entries;
    /// stat: size, kind, mtime.
    Fields metadata;
    std::string backup_id;
    /// seq of the node's local audit record for this directive.
    std::optional<std::uint64_t> local_seq;

    bool executed() const noexcept { return result == governance::AuditResult::allowed_executed; }
};

Frame to_frame(const Directive& d);
/// Error(ProtocolError) on malformed frames.
Directive directive_from_frame(const Frame& f);

Frame to_frame(const DirectiveResult& r, const std::string& issuer, const std::optional<SessionId>& session);
DirectiveResult result_from_frame(const Frame& f);

}  // namespace clawnet::wire

#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/error.hpp"
#include "clawnet/common/trace_sink.hpp"
#include "clawnet/governance/audit.hpp"
#include "clawnet/node/backup.hpp"
#include "clawnet/node/config.hpp"
#include "clawnet/wire/directive.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace clawnet::node {

/// Thrown from a fault hook to model the process dying at that point. The
/// executor lets it escape untouched: no cleanup, no audit record.
struct SimulatedCrash {
    std::string point;
};

/// Called with "after_backup" once the pre-execution backup is durable and
/// before the mutation starts.
using FaultHook = std::function<void(std::string_view point)>;

struct Reversal {
    std::uint64_t seq = 0;
    std::string action;
    std::vector<std::string> targets;
};

struct SkippedReversal {
    std::uint64_t seq = 0;
    Errc reason = Errc::ConflictingLaterEdit;
    std::string detail;
};

struct RestoreReport {
    std::vector<Reversal> reversed;
    std::vector<SkippedReversal> skipped;
};

/// Edge executor: L2 check, file primitives with pre-execution backup and
/// staged deletion, local hash-chained audit log, undo and rollback.
/// Directives run one at a time; undo/rollback hold the same lock.
///
/// The local log lives at `<backup_root>/audit.log` and the backup index at
/// `<backup_root>/index.log` (both under fs_root).
class NodeEndpoint {
public:
    NodeEndpoint(NodeConfig config, const Clock& clock, EventSink* sink = nullptr, bool durable = true);

    const NodeConfig& config() const noexcept { return config_; }
    static const std::vector<std::string>& capabilities();

    wire::Frame registration_frame() const;

    /// L2, then execution, then a local audit record; the result is only
    /// returned once the record is appended.
    wire::DirectiveResult handle(const wire::Directive& directive);

    /// DIRECTIVE frame in, DIRECTIVE_RESULT frame out. A DIRECTIVE carrying
    /// `control=undo count=N` or `control=rollback to_seq=S` from
    /// `<owner>/@owner` runs undo/rollback instead.
    wire::Frame handle_frame(const wire::Frame& frame);

    /// Reverses the last `last_n` not-yet-reversed mutations, newest first.
    RestoreReport undo(std::size_t last_n);
    /// Reverses every not-yet-reversed mutation with seq >= to_seq.
    RestoreReport rollback(std::uint64_t to_seq);

    governance::AuditLog& audit() noexcept { return *audit_; }
    const BackupIndex& backups() const noexcept { return *backups_; }

    void set_fault_hook(FaultHook hook);

    /// Directives that reached the file system (allowed_executed).
    std::size_t executed_count() const;

private:
    /// Error text with physical paths rewritten to logical ones.
    std::string logical_detail(std::string text) const;

    struct Outcome {
        wire::DirectiveResult result;
        Fields ext;
    };

    Outcome execute(const wire::Directive& d, std::uint64_t seq);
    BackupRecord make_backup(const std::string& logical, const wire::Directive& d, std::uint64_t seq);
    std::optional<SkippedReversal> revert(const governance::AuditRecord& rec);
    RestoreReport reverse(const std::vector<governance::AuditRecord>& candidates, const std::string& mode);
    std::vector<governance::AuditRecord> reversible_records() const;
    governance::AuditRecord append(governance::AuditEntry entry);
    void fault(std::string_view point);

    NodeConfig config_;
    const Clock& clock_;
    EventSink* sink_;
    bool durable_;
    std::unique_ptr<governance::AuditLog> audit_;
    std::unique_ptr<BackupIndex> backups_;
    mutable std::mutex exec_mu_;
    FaultHook fault_hook_;
    std::size_t executed_ = 0;
};

}  // namespace clawnet::node

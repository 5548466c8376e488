#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/clock.hpp"
#include "clawnet/common/digest.hpp"
#include "clawnet/common/ids.hpp"

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clawnet::governance {

enum class AuditResult { allowed_executed, denied_l1, denied_l2, failed_exec, escalated };

std::string_view to_string(AuditResult r) noexcept;
std::optional<AuditResult> parse_audit_result(std::string_view text) noexcept;

/// ℓ = (o, u, I, result, t) before it is placed on a chain. `action` is the
/// file primitive ("read", "delete", ...) for directives, or a dotted control
/// event name ("identity.create", "session.approve", ...) for everything else.
struct AuditEntry {
    std::string action;
    std::vector<std::string> targets;
    UserId owner;
    IdentityId identity;
    std::optional<SessionId> session;
    std::string payload_digest;
    AuditResult result = AuditResult::allowed_executed;
    Millis timestamp = 0;
    /// Extension fields, serialized as `x.<key>` in declared order.
    Fields ext;
};

struct AuditRecord : AuditEntry {
    std::uint64_t seq = 0;
    Digest prev_hash = kZeroDigest;
    Digest record_hash = kZeroDigest;

    /// Canonical serialization of every field except record_hash; this is
    /// the hash input.
    std::string body() const;
    Digest compute_hash() const { return sha256(body()); }
    /// `body() + " hash=64:<hex>"`, no trailing newline.
    std::string to_line() const;

    /// Strict: only byte-exact canonical lines parse.
    static std::optional<AuditRecord> parse_line(std::string_view line);

    std::optional<std::string> ext_value(std::string_view key) const { return field(ext, key); }
};

struct ChainStatus {
    bool ok = true;
    std::uint64_t broken_at = 0;

    static ChainStatus intact() { return {}; }
    static ChainStatus broken(std::uint64_t seq) { return {false, seq}; }
};

ChainStatus verify_chain(std::span<const AuditRecord> records);

/// Verifies a serialized log (one record per '\n'-terminated line). A line
/// that does not parse counts as a break at its index.
ChainStatus verify_serialized(std::string_view content);

ChainStatus verify_file(const std::filesystem::path& file);

/// Append-only, hash-chained log. Appends are serialized; the line is
/// written (and fsync'ed when durable) before the record becomes visible.
class AuditLog {
public:
    /// In-memory log.
    AuditLog() = default;

    /// File-backed log; existing content is loaded and must verify, else
    /// Error(ChainBroken). Open failures raise Error(StorageFailure).
    explicit AuditLog(std::filesystem::path file, bool durable = true);
    ~AuditLog();

    AuditLog(const AuditLog&) = delete;
    AuditLog& operator=(const AuditLog&) = delete;

    /// Throws Error(StorageFailure) when the write fails; nothing is
    /// appended in that case.
    AuditRecord append(AuditEntry entry);

    std::vector<AuditRecord> records() const;
    std::vector<AuditRecord> page(std::uint64_t since_seq, std::size_t limit) const;
    std::size_t size() const;

    /// Verifies the in-memory chain.
    ChainStatus verify() const;

    const std::optional<std::filesystem::path>& file() const noexcept { return file_; }

private:
    mutable std::mutex mu_;
    std::vector<AuditRecord> records_;
    std::optional<std::filesystem::path> file_;
    int fd_ = -1;
    bool durable_ = false;
};

}  // namespace clawnet::governance

#include "clawnet/governance/audit.hpp"

#include "clawnet/common/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace clawnet::governance {

std::string_view to_string(AuditResult r) noexcept {
    switch (r) {
        case AuditResult::allowed_executed: return "allowed_executed";
        case AuditResult::denied_l1: return "denied_l1";
        case AuditResult::denied_l2: return "denied_l2";
        case AuditResult::failed_exec: return "failed_exec";
        case AuditResult::escalated: return "escalated";
    }
    return "?";
}

std::optional<AuditResult> parse_audit_result(std::string_view text) noexcept {
    for (auto r : {AuditResult::allowed_executed, AuditResult::denied_l1, AuditResult::denied_l2,
                   AuditResult::failed_exec, AuditResult::escalated})
        if (to_string(r) == text) return r;
    return std::nullopt;
}

std::string AuditRecord::body() const {
    CanonicalWriter w;
    w.add("seq", std::to_string(seq));
    w.add("ts", format_utc(timestamp));
    w.add("owner", owner.str());
    w.add("identity", identity.str());
    w.add("action", action);
    for (const auto& t : targets) w.add("target", t);
    w.add("session", session ? session->str() : std::string());
    w.add("digest", payload_digest);
    w.add("result", to_string(result));
    for (const auto& [k, v] : ext) w.add("x." + k, v);
    w.add("prev", to_hex(prev_hash));
    return w.take();
}

std::string AuditRecord::to_line() const {
    CanonicalWriter w;
    w.add("hash", to_hex(record_hash));
    return body() + " " + w.str();
}

std::optional<AuditRecord> AuditRecord::parse_line(std::string_view line) {
    auto fields = parse_canonical(line);
    if (!fields) return std::nullopt;
    const Fields& f = *fields;
    std::size_t i = 0;
    auto expect = [&](std::string_view key) -> const std::string* {
        if (i >= f.size() || f[i].first != key) return nullptr;
        return &f[i++].second;
    };

    AuditRecord r;
    try {
        const std::string* v = expect("seq");
        if (!v || v->empty() || (v->size() > 1 && (*v)[0] == '0')) return std::nullopt;
        for (char c : *v)
            if (c < '0' || c > '9') return std::nullopt;
        r.seq = std::stoull(*v);
        if (!(v = expect("ts"))) return std::nullopt;
        r.timestamp = parse_utc(*v);
        if (!(v = expect("owner"))) return std::nullopt;
        r.owner = UserId(*v);
        if (!(v = expect("identity"))) return std::nullopt;
        r.identity = IdentityId(*v);
        if (!(v = expect("action"))) return std::nullopt;
        r.action = *v;
        while (i < f.size() && f[i].first == "target") r.targets.push_back(f[i++].second);
        if (!(v = expect("session"))) return std::nullopt;
        if (!v->empty()) r.session = SessionId(*v);
        if (!(v = expect("digest"))) return std::nullopt;
        r.payload_digest = *v;
        if (!(v = expect("result"))) return std::nullopt;
        auto res = parse_audit_result(*v);
        if (!res) return std::nullopt;
        r.result = *res;
        while (i < f.size() && f[i].first.rfind("x.", 0) == 0) {
            r.ext.emplace_back(f[i].first.substr(2), f[i].second);
            ++i;
        }
        if (!(v = expect("prev")) || !from_hex(*v, r.prev_hash)) return std::nullopt;
        if (!(v = expect("hash")) || !from_hex(*v, r.record_hash)) return std::nullopt;
        if (i != f.size()) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (r.to_line() != line) return std::nullopt;
    return r;
}

ChainStatus verify_chain(std::span<const AuditRecord> records) {
    Digest expected_prev = kZeroDigest;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.seq != i || r.prev_hash != expected_prev || r.compute_hash() != r.record_hash)
            return ChainStatus::broken(i);
        expected_prev = r.record_hash;
    }
    return ChainStatus::intact();
}

ChainStatus verify_serialized(std::string_view content) {
    Digest expected_prev = kZeroDigest;
    std::uint64_t index = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string_view::npos) return ChainStatus::broken(index);  // torn tail
        auto rec = AuditRecord::parse_line(content.substr(pos, nl - pos));
        if (!rec || rec->seq != index || rec->prev_hash != expected_prev ||
            rec->compute_hash() != rec->record_hash)
            return ChainStatus::broken(index);
        expected_prev = rec->record_hash;
        ++index;
        pos = nl + 1;
    }
    return ChainStatus::intact();
}

ChainStatus verify_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(Errc::StorageFailure, "cannot open '" + file.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return verify_serialized(ss.str());
}

AuditLog::AuditLog(std::filesystem::path file, bool durable) : file_(std::move(file)), durable_(durable) {
    std::error_code ec;
    if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path(), ec);
    if (std::filesystem::is_regular_file(*file_, ec)) {
        std::ifstream in(*file_, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string content = ss.str();
        auto status = verify_serialized(content);
        if (!status.ok)
            fail(Errc::ChainBroken, "'" + file_->string() + "' broken at seq " + std::to_string(status.broken_at));
        std::size_t pos = 0;
        while (pos < content.size()) {
            auto nl = content.find('\n', pos);
            records_.push_back(*AuditRecord::parse_line(std::string_view(content).substr(pos, nl - pos)));
            pos = nl + 1;
        }
    }
    fd_ = ::open(file_->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(Errc::StorageFailure, "open '" + file_->string() + "': " + std::strerror(errno));
}

AuditLog::~AuditLog() {
    if (fd_ >= 0) ::close(fd_);
}

AuditRecord AuditLog::append(AuditEntry entry) {
    std::lock_guard lock(mu_);
    AuditRecord rec;
    static_cast<AuditEntry&>(rec) = std::move(entry);
    rec.seq = records_.size();
    rec.prev_hash = records_.empty() ? kZeroDigest : records_.back().record_hash;
    rec.record_hash = rec.compute_hash();

    if (fd_ >= 0) {
        std::string line = rec.to_line();
        line.push_back('\n');
        const off_t before = ::lseek(fd_, 0, SEEK_END);
        std::size_t off = 0;
        while (off < line.size()) {
            ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                int err = errno;
                // Drop a torn line so the file keeps verifying.
                if (before >= 0 && ::ftruncate(fd_, before) != 0) {}
                fail(Errc::StorageFailure, "write '" + file_->string() + "': " + std::strerror(err));
            }
            off += static_cast<std::size_t>(n);
        }
        if (durable_ && ::fsync(fd_) != 0 && errno != EINVAL)
            fail(Errc::StorageFailure, "fsync '" + file_->string() + "': " + std::strerror(errno));
    }
    records_.push_back(rec);
    return rec;
}

std::vector<AuditRecord> AuditLog::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::vector<AuditRecord> AuditLog::page(std::uint64_t since_seq, std::size_t limit) const {
    std::lock_guard lock(mu_);
    std::vector<AuditRecord> out;
    for (std::size_t i = since_seq; i < records_.size() && out.size() < limit; ++i) out.push_back(records_[i]);
    return out;
}

std::size_t AuditLog::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

ChainStatus AuditLog::verify() const {
    std::lock_guard lock(mu_);
    return verify_chain(records_);
}

}  // namespace clawnet::governance

#include "clawnet/node/endpoint.hpp"

#include "clawnet/common/digest.hpp"
#include "clawnet/identity/path.hpp"
#include "clawnet/node/l2.hpp"
#include "clawnet/node/tree_hash.hpp"

#include <algorithm>
#include <fcntl.h>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/stat.h>
#include <unistd.h>

namespace clawnet::node {

namespace fs = std::filesystem;
using governance::AuditEntry;
using governance::AuditRecord;
using governance::AuditResult;
using governance::OpKind;
using wire::Directive;
using wire::DirectiveResult;

namespace {

bool present(const fs::path& p) {
    std::error_code ec;
    return fs::exists(fs::symlink_status(p, ec));
}

std::string parent_logical(const std::string& logical) {
    auto slash = logical.rfind('/');
    return slash == 0 ? std::string("/") : logical.substr(0, slash);
}

std::string basename_logical(const std::string& logical) {
    return logical.substr(logical.rfind('/') + 1);
}

std::string compact_ts(Millis ms) {
    // 2026-03-01T00:00:05.000Z -> 20260301T000005Z
    std::string s = format_utc(ms);
    std::string out;
    for (char c : s.substr(0, 19))
        if (c != '-' && c != ':') out.push_back(c);
    return out + "Z";
}

void fsync_path(const fs::path& p) {
    int fd = ::open(p.c_str(), O_RDONLY);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

void copy_tree(const fs::path& from, const fs::path& to) {
    auto st = fs::symlink_status(from);
    if (fs::is_symlink(st)) {
        fs::copy_symlink(from, to);
    } else if (fs::is_directory(st)) {
        fs::create_directory(to);
        for (const auto& e : fs::directory_iterator(from)) copy_tree(e.path(), to / e.path().filename());
    } else {
        fs::copy_file(from, to, fs::copy_options::overwrite_existing);
    }
}

void move_tree(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::rename(from, to, ec);
    if (!ec) return;
    if (ec != std::errc::cross_device_link) throw fs::filesystem_error("rename", from, to, ec);
    copy_tree(from, to);
    fs::remove_all(from);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(Errc::ExecFailure, "cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes, bool durable) {
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::ExecFailure, "cannot create '" + p.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) fail(Errc::ExecFailure, "write failed on '" + p.string() + "'");
    }
    if (durable) fsync_path(p);
}

std::string kind_of(const fs::file_status& st) {
    if (fs::is_symlink(st)) return "symlink";
    if (fs::is_directory(st)) return "dir";
    if (fs::is_regular_file(st)) return "file";
    return "other";
}

const std::string kFresh = "fresh";

}  // namespace

std::string NodeEndpoint::logical_detail(std::string text) const {
    auto root = config_.fs_root.lexically_normal().string();
    while (root.size() > 1 && root.back() == '/') root.pop_back();
    if (root == "/") return text;
    for (auto pos = text.find(root); pos != std::string::npos; pos = text.find(root, pos)) text.erase(pos, root.size());
    return text;
}

NodeEndpoint::NodeEndpoint(NodeConfig config, const Clock& clock, EventSink* sink, bool durable)
    : config_(std::move(config)), clock_(clock), sink_(sink), durable_(durable) {
    config_.validate();
    auto backup_phys = config_.physical(config_.backup_root);
    fs::create_directories(backup_phys);
    fs::create_directories(config_.physical(config_.staging_root));
    audit_ = std::make_unique<governance::AuditLog>(backup_phys / "audit.log", durable_);
    backups_ = std::make_unique<BackupIndex>(backup_phys / "index.log");
    for (const auto& r : audit_->records())
        if (r.result == AuditResult::allowed_executed && !r.ext_value("reverts")) ++executed_;
}

const std::vector<std::string>& NodeEndpoint::capabilities() {
    static const std::vector<std::string> caps = [] {
        std::vector<std::string> v;
        for (auto k : governance::kAllOpKinds) v.emplace_back(governance::to_string(k));
        return v;
    }();
    return caps;
}

wire::Frame NodeEndpoint::registration_frame() const {
    wire::Frame f;
    f.kind = wire::FrameKind::REGISTER_NODE;
    f.msg_id = "reg-" + config_.node_id.str();
    f.issuer = config_.node_id.str();
    f.set("node", config_.node_id.str());
    f.set("owner", config_.owner.str());
    f.set("token", config_.token);
    for (const auto& c : capabilities()) f.set("capability", c);
    return f;
}

void NodeEndpoint::set_fault_hook(FaultHook hook) {
    std::lock_guard lock(exec_mu_);
    fault_hook_ = std::move(hook);
}

std::size_t NodeEndpoint::executed_count() const {
    std::lock_guard lock(exec_mu_);
    return executed_;
}

void NodeEndpoint::fault(std::string_view point) {
    if (fault_hook_) fault_hook_(point);
}

AuditRecord NodeEndpoint::append(AuditEntry entry) {
    entry.owner = config_.owner;
    entry.timestamp = clock_.now_ms();
    auto rec = audit_->append(std::move(entry));
    if (sink_) {
        TraceEvent ev{"node.audit", rec.session ? rec.session->str() : "-", {}};
        ev.fields.emplace_back("node", config_.node_id.str());
        auto parsed = parse_canonical(rec.to_line());
        if (parsed) ev.fields.insert(ev.fields.end(), parsed->begin(), parsed->end());
        sink_->emit(ev);
    }
    return rec;
}

BackupRecord NodeEndpoint::make_backup(const std::string& logical, const Directive& d, std::uint64_t seq) {
    auto src = config_.physical(logical);
    BackupRecord b;
    b.timestamp = clock_.now_ms();
    b.backup_id = "bk-" + std::to_string(seq);
    b.msg_id = d.msg_id;
    b.original_path = logical;
    b.op_kind = std::string(governance::to_string(d.op.kind));
    b.backup_path = config_.backup_root + "/" + format_utc_date(b.timestamp) + "/" + std::to_string(seq) + "-" +
                    basename_logical(logical);
    b.content_hash = tree_hash(src);
    auto dst = config_.physical(b.backup_path);
    fs::create_directories(dst.parent_path());
    if (present(dst)) fs::remove_all(dst);
    copy_tree(src, dst);
    if (tree_hash(dst) != b.content_hash) fail(Errc::ExecFailure, "backup verification failed for " + logical);
    if (durable_ && fs::is_regular_file(fs::symlink_status(dst))) fsync_path(dst);
    if (durable_) fsync_path(dst.parent_path());
    backups_->add(b);
    return b;
}

NodeEndpoint::Outcome NodeEndpoint::execute(const Directive& d, std::uint64_t seq) {
    Outcome out;
    auto& r = out.result;
    const auto& t = d.op.targets;
    auto p0 = config_.physical(t[0]);

    auto need_present = [&](const fs::path& p, const std::string& logical) {
        if (!present(p)) fail(Errc::NotFound, logical + " does not exist");
    };
    auto need_parent_dir = [&](const std::string& logical) {
        auto parent = config_.physical(parent_logical(logical));
        if (!fs::is_directory(parent)) fail(Errc::NotFound, "parent of " + logical + " is not a directory");
    };
    auto need_absent = [&](const fs::path& p, const std::string& logical) {
        if (present(p)) fail(Errc::AlreadyExists, logical + " already exists");
    };

    switch (d.op.kind) {
    case OpKind::read: {
        need_present(p0, t[0]);
        if (!fs::is_regular_file(p0)) fail(Errc::ExecFailure, t[0] + " is not a regular file");
        r.content = read_file(p0);
        break;
    }
    case OpKind::list: {
        need_present(p0, t[0]);
        if (!fs::is_directory(p0)) fail(Errc::ExecFailure, t[0] + " is not a directory");
        for (const auto& e : fs::directory_iterator(p0)) {
            auto name = e.path().filename().string();
            if (e.is_directory() && !e.is_symlink()) name += "/";
            r.entries.push_back(std::move(name));
        }
        std::sort(r.entries.begin(), r.entries.end());
        break;
    }
    case OpKind::stat: {
        struct ::stat st {};
        if (::lstat(p0.c_str(), &st) != 0) fail(Errc::NotFound, t[0] + " does not exist");
        auto fst = fs::symlink_status(p0);
        r.metadata.emplace_back("kind", kind_of(fst));
        r.metadata.emplace_back("size", std::to_string(fs::is_regular_file(fst) ? st.st_size : 0));
        Millis mtime = static_cast<Millis>(st.st_mtim.tv_sec) * 1000 + st.st_mtim.tv_nsec / 1000000;
        r.metadata.emplace_back("mtime", format_utc(mtime));
        break;
    }
    case OpKind::write: {
        if (!d.op.payload_digest.empty() && d.op.payload_digest != sha256_hex(d.content))
            fail(Errc::ExecFailure, "payload digest mismatch");
        need_parent_dir(t[0]);
        auto st = fs::symlink_status(p0);
        if (fs::is_directory(st)) fail(Errc::ExecFailure, t[0] + " is a directory");
        std::optional<BackupRecord> bk;
        if (fs::exists(st)) bk = make_backup(t[0], d, seq);
        fault("after_backup");
        auto tmp = p0.parent_path() / (".clawnet-tmp-" + std::to_string(seq));
        try {
            write_file(tmp, d.content, durable_);
            fs::rename(tmp, p0);
        } catch (...) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw;
        }
        out.ext.emplace_back("backup", bk ? bk->backup_id : kFresh);
        out.ext.emplace_back("post", tree_hash(p0));
        r.backup_id = bk ? bk->backup_id : kFresh;
        break;
    }
    case OpKind::move:
    case OpKind::rename: {
        auto p1 = config_.physical(t[1]);
        need_present(p0, t[0]);
        need_absent(p1, t[1]);
        need_parent_dir(t[1]);
        if (d.op.kind == OpKind::rename && parent_logical(t[0]) != parent_logical(t[1]))
            fail(Errc::ExecFailure, "rename must keep the parent directory");
        if (identity::path_within(t[0], t[1])) fail(Errc::ExecFailure, "cannot move a directory into itself");
        auto bk = make_backup(t[0], d, seq);
        fault("after_backup");
        move_tree(p0, p1);
        out.ext.emplace_back("backup", bk.backup_id);
        out.ext.emplace_back("post", tree_hash(p1));
        r.backup_id = bk.backup_id;
        break;
    }
    case OpKind::copy: {
        auto p1 = config_.physical(t[1]);
        need_present(p0, t[0]);
        need_absent(p1, t[1]);
        need_parent_dir(t[1]);
        if (identity::path_within(t[0], t[1])) fail(Errc::ExecFailure, "cannot copy a directory into itself");
        fault("after_backup");
        try {
            copy_tree(p0, p1);
        } catch (...) {
            std::error_code ec;
            fs::remove_all(p1, ec);
            throw;
        }
        out.ext.emplace_back("backup", kFresh);
        out.ext.emplace_back("post", tree_hash(p1));
        r.backup_id = kFresh;
        break;
    }
    case OpKind::mkdir: {
        need_absent(p0, t[0]);
        need_parent_dir(t[0]);
        fault("after_backup");
        fs::create_directory(p0);
        out.ext.emplace_back("backup", kFresh);
        out.ext.emplace_back("post", tree_hash(p0));
        r.backup_id = kFresh;
        break;
    }
    case OpKind::remove: {
        need_present(p0, t[0]);
        auto bk = make_backup(t[0], d, seq);
        fault("after_backup");
        std::string bucket = config_.staging_root + "/" + compact_ts(clock_.now_ms()) + "-" + std::to_string(seq);
        std::string staged = bucket + t[0];
        auto sp = config_.physical(staged);
        fs::create_directories(sp.parent_path());
        move_tree(p0, sp);
        out.ext.emplace_back("backup", bk.backup_id);
        out.ext.emplace_back("staged", staged);
        out.ext.emplace_back("post", tree_hash(sp));
        r.backup_id = bk.backup_id;
        break;
    }
    }
    r.result = AuditResult::allowed_executed;
    return out;
}

DirectiveResult NodeEndpoint::handle(const Directive& d) {
    std::lock_guard lock(exec_mu_);
    AuditEntry entry;
    entry.action = std::string(governance::to_string(d.op.kind));
    entry.targets = d.op.targets;
    entry.identity = d.op.issuer;
    entry.session = d.op.session;
    entry.payload_digest = d.op.payload_digest;
    entry.ext.emplace_back("msg", d.msg_id);

    DirectiveResult res;
    auto decision = authorize_l2(d.op, config_);
    if (!decision) {
        res.result = AuditResult::denied_l2;
        res.deny_reason = decision.reason;
        res.detail = decision.detail;
        entry.result = AuditResult::denied_l2;
        entry.ext.emplace_back("reason", std::string(governance::to_string(*decision.reason)));
        auto rec = append(std::move(entry));
        res.msg_id = d.msg_id;
        res.local_seq = rec.seq;
        return res;
    }

    const auto seq = static_cast<std::uint64_t>(audit_->size());
    Outcome out;
    try {
        out = execute(d, seq);
    } catch (const Error& e) {
        out = {};
        out.result.result = AuditResult::failed_exec;
        out.result.error = e.code();
        out.result.detail = logical_detail(e.what());
    } catch (const std::exception& e) {
        out = {};
        out.result.result = AuditResult::failed_exec;
        out.result.error = Errc::ExecFailure;
        out.result.detail = logical_detail(e.what());
    }
    res = std::move(out.result);
    res.msg_id = d.msg_id;
    entry.result = res.result;
    if (res.error) entry.ext.emplace_back("error", std::string(to_string(*res.error)));
    for (auto& f : out.ext) entry.ext.push_back(f);

    try {
        auto rec = append(entry);
        res.local_seq = rec.seq;
        if (res.executed()) ++executed_;
    } catch (const Error& e) {
        if (res.executed() && governance::is_mutative(d.op.kind)) {
            // The mutation cannot be logged, so it must not stand.
            AuditRecord unlogged;
            static_cast<AuditEntry&>(unlogged) = entry;
            unlogged.seq = seq;
            revert(unlogged);
        }
        res = DirectiveResult{};
        res.msg_id = d.msg_id;
        res.result = AuditResult::failed_exec;
        res.error = e.code();
        res.detail = logical_detail(e.what());
    }
    return res;
}

std::vector<AuditRecord> NodeEndpoint::reversible_records() const {
    auto records = audit_->records();
    std::set<std::uint64_t> reverted;
    for (const auto& r : records)
        if (auto v = r.ext_value("reverts")) reverted.insert(std::stoull(*v));
    std::vector<AuditRecord> out;
    for (const auto& r : records) {
        if (r.result != AuditResult::allowed_executed || r.ext_value("reverts")) continue;
        auto kind = governance::parse_op_kind(r.action);
        if (!kind || !governance::is_mutative(*kind)) continue;
        if (reverted.count(r.seq)) continue;
        out.push_back(r);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::optional<SkippedReversal> NodeEndpoint::revert(const AuditRecord& rec) {
    auto skip = [&](Errc why, std::string detail) {
        return std::optional<SkippedReversal>(SkippedReversal{rec.seq, why, std::move(detail)});
    };
    auto kind = governance::parse_op_kind(rec.action);
    if (!kind) return skip(Errc::InvalidArgument, "unknown action " + rec.action);
    auto post = rec.ext_value("post").value_or("");
    auto backup = rec.ext_value("backup").value_or(kFresh);
    const auto& t = rec.targets;
    auto p0 = config_.physical(t[0]);

    auto restore_backup = [&](const fs::path& dest) -> std::optional<SkippedReversal> {
        auto bk = backups_->find(backup);
        if (!bk) return skip(Errc::NotFound, "backup " + backup + " missing from index");
        auto bp = config_.physical(bk->backup_path);
        if (tree_hash(bp) != bk->content_hash) return skip(Errc::ConflictingLaterEdit, "backup content altered");
        auto tmp = dest.parent_path() / (".clawnet-restore-" + std::to_string(rec.seq));
        std::error_code ec;
        fs::remove_all(tmp, ec);
        copy_tree(bp, tmp);
        if (present(dest)) fs::remove_all(dest);
        fs::rename(tmp, dest);
        return std::nullopt;
    };

    switch (*kind) {
    case OpKind::write: {
        if (tree_hash(p0) != post) return skip(Errc::ConflictingLaterEdit, t[0] + " changed after the write");
        if (backup == kFresh) {
            fs::remove(p0);
            return std::nullopt;
        }
        return restore_backup(p0);
    }
    case OpKind::move:
    case OpKind::rename: {
        auto p1 = config_.physical(t[1]);
        if (tree_hash(p1) != post) return skip(Errc::ConflictingLaterEdit, t[1] + " changed after the move");
        if (present(p0)) return skip(Errc::ConflictingLaterEdit, t[0] + " was recreated after the move");
        if (!fs::is_directory(p0.parent_path())) return skip(Errc::NotFound, "parent of " + t[0] + " is gone");
        move_tree(p1, p0);
        return std::nullopt;
    }
    case OpKind::copy: {
        auto p1 = config_.physical(t[1]);
        if (tree_hash(p1) != post) return skip(Errc::ConflictingLaterEdit, t[1] + " changed after the copy");
        fs::remove_all(p1);
        return std::nullopt;
    }
    case OpKind::mkdir: {
        if (tree_hash(p0) != post) return skip(Errc::ConflictingLaterEdit, t[0] + " is no longer empty");
        fs::remove(p0);
        return std::nullopt;
    }
    case OpKind::remove: {
        if (present(p0)) return skip(Errc::ConflictingLaterEdit, t[0] + " was recreated after the delete");
        if (!fs::is_directory(p0.parent_path())) return skip(Errc::NotFound, "parent of " + t[0] + " is gone");
        auto staged = rec.ext_value("staged");
        if (staged) {
            auto sp = config_.physical(*staged);
            if (present(sp) && tree_hash(sp) == post) {
                move_tree(sp, p0);
                return std::nullopt;
            }
        }
        return restore_backup(p0);
    }
    default:
        return skip(Errc::InvalidArgument, rec.action + " is not mutative");
    }
}

RestoreReport NodeEndpoint::reverse(const std::vector<AuditRecord>& candidates, const std::string& mode) {
    RestoreReport report;
    for (const auto& rec : candidates) {
        std::optional<SkippedReversal> skipped;
        try {
            skipped = revert(rec);
        } catch (const std::exception& e) {
            skipped = SkippedReversal{rec.seq, Errc::ExecFailure, logical_detail(e.what())};
        }
        if (skipped) {
            report.skipped.push_back(std::move(*skipped));
            continue;
        }
        AuditEntry entry;
        entry.action = rec.action;
        entry.targets = rec.targets;
        entry.identity = IdentityId(config_.owner.str() + "/@owner");
        entry.session = rec.session;
        entry.result = AuditResult::allowed_executed;
        entry.ext.emplace_back("reverts", std::to_string(rec.seq));
        entry.ext.emplace_back("mode", mode);
        append(std::move(entry));
        report.reversed.push_back(Reversal{rec.seq, rec.action, rec.targets});
    }
    return report;
}

namespace {
void require_intact(const governance::AuditLog& log) {
    auto status = log.file() ? governance::verify_file(*log.file()) : log.verify();
    if (!status.ok) fail(Errc::ChainBroken, "local audit chain broken at seq " + std::to_string(status.broken_at));
}
}  // namespace

RestoreReport NodeEndpoint::undo(std::size_t last_n) {
    std::lock_guard lock(exec_mu_);
    require_intact(*audit_);
    auto candidates = reversible_records();
    if (candidates.size() > last_n) candidates.resize(last_n);
    return reverse(candidates, "undo");
}

RestoreReport NodeEndpoint::rollback(std::uint64_t to_seq) {
    std::lock_guard lock(exec_mu_);
    require_intact(*audit_);
    auto candidates = reversible_records();
    std::erase_if(candidates, [&](const AuditRecord& r) { return r.seq < to_seq; });
    return reverse(candidates, "rollback");
}

wire::Frame NodeEndpoint::handle_frame(const wire::Frame& frame) {
    auto control = frame.get("control");
    if (frame.kind == wire::FrameKind::DIRECTIVE && !control.empty()) {
        DirectiveResult res;
        res.msg_id = frame.msg_id;
        if (frame.issuer != config_.owner.str() + "/@owner") {
            res.result = AuditResult::failed_exec;
            res.error = Errc::NotOwner;
            res.detail = "control directives come from the node owner";
            return wire::to_frame(res, config_.node_id.str(), frame.session);
        }
        try {
            RestoreReport report;
            if (control == "undo") report = undo(std::stoull(frame.get("count", "1")));
            else if (control == "rollback") report = rollback(std::stoull(frame.get("to_seq")));
            else fail(Errc::ProtocolError, "unknown control '" + control + "'");
            res.result = AuditResult::allowed_executed;
            for (const auto& r : report.reversed) res.entries.push_back("reversed:" + std::to_string(r.seq) + ":" + r.action);
            for (const auto& s : report.skipped)
                res.entries.push_back("skipped:" + std::to_string(s.seq) + ":" + std::string(to_string(s.reason)) + ":" +
                                      s.detail);
        } catch (const Error& e) {
            res.result = AuditResult::failed_exec;
            res.error = e.code();
            res.detail = logical_detail(e.what());
        } catch (const std::exception& e) {
            res.result = AuditResult::failed_exec;
            res.error = Errc::ProtocolError;
            res.detail = logical_detail(e.what());
        }
        return wire::to_frame(res, config_.node_id.str(), frame.session);
    }
    auto d = wire::directive_from_frame(frame);
    return wire::to_frame(handle(d), config_.node_id.str(), frame.session);
}

}  // namespace clawnet::node

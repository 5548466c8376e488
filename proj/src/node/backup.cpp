#include "clawnet/node/backup.hpp"

#include "clawnet/common/error.hpp"

#include <fstream>

namespace clawnet::node {

Fields BackupRecord::to_fields() const {
    return {{"backup", backup_id},       {"msg", msg_id},          {"original", original_path},
            {"path", backup_path},       {"op", op_kind},          {"hash", content_hash},
            {"ts", format_utc(timestamp)}};
}

std::optional<BackupRecord> BackupRecord::from_fields(const Fields& f) {
    BackupRecord r;
    auto get = [&](const char* k) { return field(f, k); };
    auto id = get("backup"), msg = get("msg"), orig = get("original"), path = get("path"), op = get("op"),
         hash = get("hash"), ts = get("ts");
    if (!id || !msg || !orig || !path || !op || !hash || !ts) return std::nullopt;
    r.backup_id = *id;
    r.msg_id = *msg;
    r.original_path = *orig;
    r.backup_path = *path;
    r.op_kind = *op;
    r.content_hash = *hash;
    try {
        r.timestamp = parse_utc(*ts);
    } catch (const Error&) {
        return std::nullopt;
    }
    return r;
}

BackupIndex::BackupIndex(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
        auto f = parse_canonical(line);
        if (!f) fail(Errc::ChainBroken, "unreadable backup index line in '" + file_->string() + "'");
        auto rec = BackupRecord::from_fields(*f);
        if (!rec) fail(Errc::ChainBroken, "malformed backup record in '" + file_->string() + "'");
        by_id_[rec->backup_id] = records_.size();
        records_.push_back(*rec);
    }
}

void BackupIndex::add(const BackupRecord& rec) {
    std::lock_guard lock(mu_);
    if (file_) {
        std::error_code ec;
        std::filesystem::create_directories(file_->parent_path(), ec);
        std::ofstream out(*file_, std::ios::app);
        out << encode_fields(rec.to_fields()) << '\n';
        out.flush();
        if (!out) fail(Errc::StorageFailure, "cannot append to backup index '" + file_->string() + "'");
    }
    by_id_[rec.backup_id] = records_.size();
    records_.push_back(rec);
}

std::optional<BackupRecord> BackupIndex::find(const std::string& backup_id) const {
    std::lock_guard lock(mu_);
    auto it = by_id_.find(backup_id);
    if (it == by_id_.end()) return std::nullopt;
    return records_[it->second];
}

std::vector<BackupRecord> BackupIndex::all() const {
    std::lock_guard lock(mu_);
    return records_;
}

}  // namespace clawnet::node

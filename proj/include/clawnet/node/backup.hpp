#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/clock.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace clawnet::node {

struct BackupRecord {
    std::string backup_id;
    std::string msg_id;
    std::string original_path;  // logical
    std::string backup_path;    // logical, under backup_root
    std::string op_kind;
    std::string content_hash;   // tree_hash of the original before mutation
    Millis timestamp = 0;

    Fields to_fields() const;
    static std::optional<BackupRecord> from_fields(const Fields& f);
};

/// Append-only index of backups, one canonical line per record.
class BackupIndex {
public:
    BackupIndex() = default;
    explicit BackupIndex(std::filesystem::path file);

    void add(const BackupRecord& rec);
    std::optional<BackupRecord> find(const std::string& backup_id) const;
    std::vector<BackupRecord> all() const;

private:
    mutable std::mutex mu_;
    std::optional<std::filesystem::path> file_;
    std::vector<BackupRecord> records_;
    std::map<std::string, std::size_t> by_id_;
};

}  // namespace clawnet::node

#pragma once

#include "clawnet/common/ids.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace clawnet::node {

/// Node endpoint settings. All paths except `fs_root` are logical absolute
/// paths as they appear in directives; `fs_root` maps them onto the physical
/// file system (`/` in production, a sandbox directory in simulation).
struct NodeConfig {
    NodeId node_id;
    UserId owner;
    std::vector<std::string> whitelist;
    std::string staging_root;
    std::string backup_root;
    std::string server_address;
    std::string token;
    std::filesystem::path fs_root = "/";

    /// Error(InvalidArgument) unless every path is normalized and the
    /// staging/backup roots lie outside (and do not contain) every whitelist
    /// entry.
    void validate() const;

    std::filesystem::path physical(const std::string& logical) const;
};

/// `key = value` lines; `#` starts a comment; `whitelist` may repeat or
/// hold a comma-separated list. Keys: node_id, owner, whitelist,
/// staging_root, backup_root, server, token, fs_root.
NodeConfig parse_node_config(std::istream& in);
NodeConfig load_node_config(const std::filesystem::path& file);

}  // namespace clawnet::node

#include "clawnet/node/config.hpp"

#include "clawnet/common/error.hpp"
#include "clawnet/identity/path.hpp"

#include <fstream>
#include <istream>

namespace clawnet::node {

using identity::is_normalized;
using identity::path_within;

void NodeConfig::validate() const {
    if (node_id.empty() || owner.empty()) fail(Errc::InvalidArgument, "node_id and owner are required");
    if (!is_normalized(staging_root) || staging_root == "/")
        fail(Errc::InvalidArgument, "staging_root must be a normalized non-root path");
    if (!is_normalized(backup_root) || backup_root == "/")
        fail(Errc::InvalidArgument, "backup_root must be a normalized non-root path");
    if (path_within(staging_root, backup_root) || path_within(backup_root, staging_root))
        fail(Errc::InvalidArgument, "staging_root and backup_root must be disjoint");
    for (const auto& w : whitelist) {
        if (!is_normalized(w)) fail(Errc::InvalidArgument, "whitelist entry '" + w + "' not normalized");
        for (const auto& net : {staging_root, backup_root})
            if (path_within(w, net) || path_within(net, w))
                fail(Errc::InvalidArgument, "whitelist entry '" + w + "' overlaps protected root '" + net + "'");
    }
}

std::filesystem::path NodeConfig::physical(const std::string& logical) const {
    if (logical == "/") return fs_root;
    return fs_root / std::filesystem::path(logical).relative_path();
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

NodeConfig parse_node_config(std::istream& in) {
    NodeConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(Errc::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "node_id") cfg.node_id = NodeId(value);
        else if (key == "owner") cfg.owner = UserId(value);
        else if (key == "whitelist") {
            std::size_t pos = 0;
            while (pos <= value.size()) {
                auto comma = value.find(',', pos);
                if (comma == std::string::npos) comma = value.size();
                auto item = trim(value.substr(pos, comma - pos));
                if (!item.empty()) cfg.whitelist.push_back(item);
                pos = comma + 1;
            }
        } else if (key == "staging_root") cfg.staging_root = value;
        else if (key == "backup_root") cfg.backup_root = value;
        else if (key == "server") cfg.server_address = value;
        else if (key == "token") cfg.token = value;
        else if (key == "fs_root") cfg.fs_root = value;
        else fail(Errc::InvalidArgument, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return cfg;
}

NodeConfig load_node_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail(Errc::NotFound, "cannot read node config '" + file.string() + "'");
    return parse_node_config(in);
}

}  // namespace clawnet::node

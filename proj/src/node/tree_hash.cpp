#include "clawnet/node/tree_hash.hpp"

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/digest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace clawnet::node {

namespace fs = std::filesystem;

namespace {

std::string hash_node(const fs::path& p, fs::file_status st) {
    switch (st.type()) {
        case fs::file_type::regular: {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return sha256_hex("F" + ss.str());
        }
        case fs::file_type::symlink: return sha256_hex("L" + fs::read_symlink(p).string());
        case fs::file_type::directory: {
            std::vector<std::pair<std::string, std::string>> children;
            for (const auto& e : fs::directory_iterator(p))
                children.emplace_back(e.path().filename().string(), hash_node(e.path(), e.symlink_status()));
            std::sort(children.begin(), children.end());
            CanonicalWriter w;
            w.add("type", "D");
            for (const auto& [name, h] : children) w.add("e." + std::to_string(name.size()), name + "=" + h);
            return sha256_hex(w.str());
        }
        default: return sha256_hex("O");
    }
}

}  // namespace

std::string tree_hash(const fs::path& p) {
    std::error_code ec;
    auto st = fs::symlink_status(p, ec);
    if (ec || st.type() == fs::file_type::not_found) return "absent";
    return hash_node(p, st);
}

}  // namespace clawnet::node

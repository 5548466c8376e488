#include "clawnet/node/l2.hpp"

#include "clawnet/identity/path.hpp"

#include <filesystem>

namespace clawnet::node {

namespace fs = std::filesystem;
using governance::Decision;
using governance::DenyReason;
using identity::normalize_path;
using identity::path_within;

namespace {

std::string resolved(const fs::path& p) {
    auto r = fs::weakly_canonical(p).lexically_normal().string();
    if (r.size() > 1 && r.back() == '/') r.pop_back();
    return r;
}

/// `real` as seen from the node's logical root, for deny details.
std::string logical(const NodeConfig& config, const std::string& real) {
    auto root = resolved(config.fs_root);
    if (root == "/") return real;
    if (real == root) return "/";
    if (real.size() > root.size() && real.compare(0, root.size(), root) == 0 && real[root.size()] == '/')
        return real.substr(root.size());
    return "<outside node root>";
}

}  // namespace

Decision authorize_l2(const governance::Operation& op, const NodeConfig& config) noexcept {
    try {
        if (!op.well_formed()) return Decision::deny(DenyReason::malformed, "wrong target count");
        for (const auto& raw : op.targets) {
            auto path = normalize_path(raw);
            if (!path) return Decision::deny(DenyReason::malformed, raw);

            for (const auto& net : {config.staging_root, config.backup_root})
                if (!net.empty() && (path_within(net, *path) || path_within(*path, net)))
                    return Decision::deny(DenyReason::outside_whitelist, "protected: " + *path);

            const std::string* entry = nullptr;
            for (const auto& w : config.whitelist)
                if (path_within(w, *path)) entry = &w;
            if (!entry) return Decision::deny(DenyReason::outside_whitelist, *path);

            std::string real = resolved(config.physical(*path));
            bool inside = false;
            for (const auto& w : config.whitelist)
                if (path_within(resolved(config.physical(w)), real)) inside = true;
            if (!inside) return Decision::deny(DenyReason::symlink_escape, *path + " -> " + logical(config, real));
            for (const auto& net : {config.staging_root, config.backup_root})
                if (!net.empty() && path_within(resolved(config.physical(net)), real))
                    return Decision::deny(DenyReason::symlink_escape, "protected: " + logical(config, real));
        }
        return Decision::allow();
    } catch (...) {
        return Decision::deny(DenyReason::internal_error);
    }
}

}  // namespace clawnet::node

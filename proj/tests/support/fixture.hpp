#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/idgen.hpp"
#include "clawnet/common/trace_sink.hpp"
#include "clawnet/node/endpoint.hpp"
#include "clawnet/orchestrator/node_link.hpp"
#include "clawnet/orchestrator/orchestrator.hpp"
#include "clawnet/runtime/policy.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "clawnet-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// `/home/x` under a sandbox root.
inline fs::path under(const fs::path& root, const std::string& logical) {
    return root / logical.substr(1);
}

inline clawnet::node::NodeConfig node_config(const std::string& owner, std::vector<std::string> whitelist,
                                             const fs::path& fs_root) {
    clawnet::node::NodeConfig cfg;
    cfg.node_id = clawnet::NodeId(owner + "-node");
    cfg.owner = clawnet::UserId(owner);
    cfg.whitelist = std::move(whitelist);
    cfg.staging_root = "/var/clawnet/" + owner + "/staging";
    cfg.backup_root = "/var/clawnet/" + owner + "/backup";
    cfg.fs_root = fs_root;
    return cfg;
}

/// An orchestrator on a virtual clock with two users `u1`/`u2` whose
/// resource roots are `/home/u1` and `/home/u2`, plus helpers for the usual
/// contact/identity wiring.
struct World {
    clawnet::VirtualClock clock;
    clawnet::IdGenerator ids{42};
    clawnet::RecordingSink sink;
    std::unique_ptr<clawnet::orchestrator::Orchestrator> orch;

    explicit World(clawnet::orchestrator::Settings settings = {}) {
        orch = std::make_unique<clawnet::orchestrator::Orchestrator>(clock, ids, sink, std::move(settings));
    }

    void add_users(std::initializer_list<const char*> users) {
        for (const char* u : users) orch->add_user(clawnet::UserId(u), {std::string("/home/") + u});
    }

    clawnet::IdentityId identity(const std::string& owner, const std::string& tag, const std::string& scope,
                                 std::set<std::string> peers) {
        std::set<clawnet::UserId> p;
        for (const auto& x : peers) p.insert(clawnet::UserId(x));
        return orch
            ->create_identity(clawnet::UserId(owner), tag, clawnet::identity::AuthorizationScope::parse(scope), p)
            .id;
    }

    void contact(const std::string& a, const std::string& b) {
        orch->request_contact(clawnet::UserId(a), clawnet::UserId(b));
        orch->confirm_contact(clawnet::UserId(b), clawnet::UserId(a));
    }

    void present(const std::string& owner, const std::string& peer, const clawnet::IdentityId& id) {
        orch->assign_contact_identity(clawnet::UserId(owner), clawnet::UserId(peer), id);
    }

    void echo(const clawnet::IdentityId& id, std::size_t turns = 0) {
        orch->bind_policy(id, std::make_shared<clawnet::runtime::EchoPolicy>(turns));
    }

    /// Approves every pending request, oldest first, until none is left.
    void approve_all() {
        for (auto pending = orch->pending_approvals(); !pending.empty(); pending = orch->pending_approvals())
            orch->resolve_approval(pending.front().request_id, pending.front().approver,
                                   clawnet::orchestrator::Decision::approve);
    }

    std::size_t count(const std::string& kind) const {
        std::size_t n = 0;
        for (const auto& e : sink.events()) n += e.kind == kind;
        return n;
    }
};

/// A node endpoint plus in-memory link registered with a World.
struct AttachedNode {
    std::unique_ptr<clawnet::node::NodeEndpoint> endpoint;
    std::shared_ptr<clawnet::orchestrator::InMemoryNodeConnection> link;

    AttachedNode(World& w, const clawnet::node::NodeConfig& cfg) {
        endpoint = std::make_unique<clawnet::node::NodeEndpoint>(cfg, w.clock, &w.sink, false);
        link = std::make_shared<clawnet::orchestrator::InMemoryNodeConnection>(*endpoint);
        w.orch->register_node(endpoint->registration_frame(), link);
    }
};

}  // namespace testsupport

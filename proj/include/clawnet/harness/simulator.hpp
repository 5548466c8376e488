#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/idgen.hpp"
#include "clawnet/harness/scenario.hpp"
#include "clawnet/harness/trace.hpp"
#include "clawnet/node/endpoint.hpp"
#include "clawnet/orchestrator/orchestrator.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clawnet::net {
class NodeListener;
class NodeClient;
}  // namespace clawnet::net

namespace clawnet::harness {

enum class Transport { memory, socket };

struct SimOptions {
    /// Overrides the scenario seed.
    std::optional<std::uint64_t> seed;
    Transport transport = Transport::memory;
    /// Sandbox for node file systems and logs; a fresh temporary directory
    /// when unset.
    std::optional<std::filesystem::path> work_dir;
    /// Keep the sandbox after the simulator is destroyed.
    bool keep = false;
};

struct RunReport {
    EventTrace trace;
    std::vector<std::string> failures;
    std::int64_t ticks = 0;
    bool quiescent = false;

    bool ok() const noexcept { return failures.empty(); }
};

/// Deterministic in-process run of a scenario: one orchestrator, one
/// runtime per user and one node endpoint per declared node, driven by a
/// virtual clock. Each tick applies due owner actions, expires overdue
/// approvals and steps every Active session once.
class Simulator {
public:
    explicit Simulator(Scenario scenario, SimOptions options = {});
    ~Simulator();

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    /// Builds users, identities, contacts, fixtures and nodes. Idempotent.
    void setup();
    /// setup(), the tick loop, then every expectation.
    RunReport run();

    orchestrator::Orchestrator& orchestrator() { return *orch_; }
    VirtualClock& clock() { return clock_; }
    node::NodeEndpoint* node(const std::string& owner);
    orchestrator::InMemoryNodeConnection* memory_link(const std::string& owner);
    IdentityId identity(const std::string& alias) const;
    const std::filesystem::path& sandbox() const noexcept { return sandbox_; }
    std::filesystem::path physical(const std::string& owner, const std::string& logical) const;
    EventTrace trace() const { return EventTrace(sink_.events()); }
    const Scenario& scenario() const noexcept { return scenario_; }

    /// Global accountability checks; one message per mismatch.
    std::vector<std::string> reconcile() const;
    /// Every server-side and node-side audit log file.
    std::vector<std::filesystem::path> log_files() const;
    std::vector<std::string> verify_logs() const;

private:
    bool apply(const OwnerAction& a);
    std::vector<std::string> evaluate(const EventTrace& trace);
    std::optional<SessionId> session_at(const std::string& index) const;

    Scenario scenario_;
    SimOptions options_;
    std::filesystem::path sandbox_;
    bool owns_sandbox_ = false;
    bool setup_done_ = false;
    VirtualClock clock_;
    IdGenerator ids_;
    RecordingSink sink_;
    std::unique_ptr<orchestrator::Orchestrator> orch_;
    std::map<std::string, std::unique_ptr<node::NodeEndpoint>> nodes_;
    std::map<std::string, std::shared_ptr<orchestrator::InMemoryNodeConnection>> links_;
    std::unique_ptr<net::NodeListener> listener_;
    std::vector<std::unique_ptr<net::NodeClient>> clients_;
    std::map<std::string, IdentityId> aliases_;
    std::map<std::pair<std::string, std::string>, std::string> initial_trees_;
};

RunReport run_scenario(const std::filesystem::path& file, SimOptions options = {});

/// Writes a fixture tree under `root` (files, dirs, symlinks of `user`).
void build_fixture(const UserSpec& user, const std::filesystem::path& root);

}  // namespace clawnet::harness

#pragma once

#include "clawnet/common/clock.hpp"
#include "clawnet/common/idgen.hpp"
#include "clawnet/node/endpoint.hpp"
#include "clawnet/orchestrator/orchestrator.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace clawnet::net {
class NodeListener;
}

namespace clawnet::server {

struct UserConfig {
    std::string id;
    std::vector<std::string> roots;
    /// Bearer token for the console API; nodes of this user present it too.
    std::string token;
};

struct IdentityConfig {
    /// Config-local alias used by `contacts`.
    std::string alias;
    std::string owner;
    std::string tag;
    std::string scope;
    std::vector<std::string> peers;
    /// echo | llm-adapter | none
    std::string policy = "none";
    std::size_t turns = 0;
};

struct ContactConfig {
    std::string a, b;
    std::string a_presents, b_presents;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    std::uint16_t node_port = 7400;
    std::uint16_t console_port = 7401;
    std::filesystem::path state_dir = "clawnet-state";
    std::size_t d_max = 3;
    std::size_t max_turns = 20;
    std::int64_t approval_deadline_s = 24 * 3600;
    std::int64_t node_timeout_ms = 5000;
    /// Interval of the dialogue stepping loop.
    std::int64_t step_interval_ms = 50;
    bool durable = true;
    std::vector<UserConfig> users;
    std::vector<IdentityConfig> identities;
    std::vector<ContactConfig> contacts;
};

/// YAML; Error(InvalidArgument) on unknown keys or missing fields.
ServerConfig parse_server_config(const std::string& yaml_text);
ServerConfig load_server_config(const std::filesystem::path& file);

/// One server-push message: `event: <type>` with a JSON `data` line.
struct PushEvent {
    std::uint64_t id = 0;
    std::string type;
    std::string data;
};

/// Fans orchestrator events out to per-owner console subscribers:
/// `approval` (a new request for the owner), `escalation` (a boundary
/// violation filed to the owner) and `session` (a state change of a
/// session the owner takes part in).
class EventHub final : public EventSink {
public:
    class Subscription {
    public:
        /// Waits up to `timeout` for the next event; nullopt on timeout or
        /// when the hub closed.
        std::optional<PushEvent> next(std::chrono::milliseconds timeout);
        bool closed() const;

    private:
        friend class EventHub;
        UserId owner_;
        mutable std::mutex mu_;
        std::condition_variable cv_;
        std::deque<PushEvent> queue_;
        bool closed_ = false;
    };

    explicit EventHub(EventSink* forward = nullptr) : forward_(forward) {}

    void emit(TraceEvent event) override;
    std::shared_ptr<Subscription> subscribe(const UserId& owner);
    void unsubscribe(const std::shared_ptr<Subscription>& sub);
    void close();
    std::size_t subscribers() const;

private:
    void publish(const UserId& owner, const std::string& type, const std::string& data);

    EventSink* forward_;
    mutable std::mutex mu_;
    std::vector<std::shared_ptr<Subscription>> subs_;
    std::uint64_t next_id_ = 1;
};

/// Owner-facing HTTP API (JSON bodies, bearer tokens) plus the
/// `text/event-stream` push channel. Every request acts as the owner the
/// token belongs to; other owners' data is refused with 403.
class ConsoleServer {
public:
    ConsoleServer(orchestrator::Orchestrator& orch, EventHub& hub, std::map<std::string, UserId> tokens);
    ~ConsoleServer();

    /// Binds (port 0 picks a free port) and serves on a background thread.
    std::uint16_t start(const std::string& host, std::uint16_t port);
    void stop();
    std::uint16_t port() const noexcept { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
};

/// A running orchestrator: node listener, console, and the loop that
/// expires approvals and steps Active sessions.
class Server {
public:
    explicit Server(ServerConfig config, const Clock& clock = default_clock());
    ~Server();

    void start();
    void stop();

    orchestrator::Orchestrator& orchestrator() { return *orch_; }
    EventHub& hub() { return hub_; }
    std::uint16_t node_port() const;
    std::uint16_t console_port() const;
    /// Config alias -> generated identity id.
    IdentityId identity(const std::string& alias) const;

    static const Clock& default_clock();

private:
    void loop();

    ServerConfig config_;
    const Clock& clock_;
    IdGenerator ids_;
    EventHub hub_;
    std::unique_ptr<orchestrator::Orchestrator> orch_;
    std::unique_ptr<net::NodeListener> listener_;
    std::unique_ptr<ConsoleServer> console_;
    std::map<std::string, IdentityId> aliases_;
    std::mutex loop_mu_;
    std::condition_variable loop_cv_;
    bool running_ = false;
    std::thread loop_thread_;
};

/// `clawnet server --config F`: runs until SIGINT/SIGTERM.
int run_server(const std::filesystem::path& config);
/// `clawnet node`: connects, registers and executes until SIGINT/SIGTERM.
int run_node(const node::NodeConfig& config);

/// Undo/rollback through the console API of a running server.
node::RestoreReport remote_node_restore(const std::string& base_url, const std::string& token, bool undo,
                                        std::uint64_t arg);

/// Parses `reversed:<seq>:<action>` / `skipped:<seq>:<code>:<detail>`
/// entries of a control result.
node::RestoreReport restore_report_from_entries(const std::vector<std::string>& entries);

}  // namespace clawnet::server

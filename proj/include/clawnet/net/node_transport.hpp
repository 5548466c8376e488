#pragma once

#include "clawnet/net/socket.hpp"
#include "clawnet/node/endpoint.hpp"
#include "clawnet/orchestrator/orchestrator.hpp"

#include <atomic>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <thread>

namespace clawnet::net {

/// Server side of one node's socket. Replies are matched to requests by
/// msg_id, so several exchanges may be in flight.
class SocketNodeConnection final : public orchestrator::NodeConnection {
public:
    explicit SocketNodeConnection(int fd) : fd_(fd) {}

    wire::Frame exchange(const wire::Frame& frame, std::chrono::milliseconds timeout) override;
    bool connected() const override { return connected_.load(); }

    /// Called by the reader for every DIRECTIVE_RESULT.
    void deliver(const wire::Frame& reply);
    /// Fails every waiter with NodeUnavailable.
    void disconnect();

private:
    int fd_;
    std::atomic<bool> connected_{true};
    std::mutex write_mu_;
    std::mutex mu_;
    std::map<std::string, std::promise<wire::Frame>> waiting_;
};

/// Accepts node connections. The first frame on a connection must be
/// REGISTER_NODE; it is checked with `authorize` (if set), registered with
/// the orchestrator and acknowledged with a REGISTER_NODE frame carrying
/// `status=ok` or `status=error`.
class NodeListener {
public:
    using Authorize = std::function<bool(const wire::Frame&)>;

    NodeListener(orchestrator::Orchestrator& orch, const std::string& host, std::uint16_t port,
                 Authorize authorize = {});
    ~NodeListener();

    std::uint16_t port() const noexcept { return port_; }
    void stop();
    bool wait_registered(const NodeId& node, std::chrono::milliseconds timeout);

private:
    void accept_loop();
    void serve(int fd);

    orchestrator::Orchestrator& orch_;
    Authorize authorize_;
    Socket listen_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex mu_;
    std::condition_variable registered_cv_;
    std::set<NodeId> registered_;
    std::vector<std::thread> workers_;
    std::vector<int> open_fds_;
};

/// Edge side: connects to the orchestrator, registers, and serves
/// directives. A reader thread feeds a bounded queue drained by a single
/// executor thread. Reconnects with exponential backoff until stopped.
class NodeClient {
public:
    NodeClient(node::NodeEndpoint& endpoint, std::string host, std::uint16_t port);
    ~NodeClient();

    void start();
    void stop();
    bool connected() const noexcept { return connected_.load(); }
    bool wait_connected(std::chrono::milliseconds timeout);
    /// Last registration error reported by the orchestrator, if any.
    std::string last_error() const;

private:
    void run();
    void serve(Socket& sock);

    node::NodeEndpoint& endpoint_;
    std::string host_;
    std::uint16_t port_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> connected_{false};
    std::thread thread_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::string last_error_;
    int current_fd_ = -1;
};

}  // namespace clawnet::net

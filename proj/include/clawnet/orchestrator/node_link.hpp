#pragma once

#include "clawnet/node/endpoint.hpp"
#include "clawnet/wire/frame.hpp"

#include <atomic>
#include <chrono>

namespace clawnet::orchestrator {

/// The orchestrator's handle on one registered node endpoint.
class NodeConnection {
public:
    virtual ~NodeConnection() = default;
    /// Sends a DIRECTIVE frame and waits for the matching DIRECTIVE_RESULT.
    /// Error(NodeUnavailable) when disconnected, Error(Timeout) on timeout.
    virtual wire::Frame exchange(const wire::Frame& frame, std::chrono::milliseconds timeout) = 0;
    virtual bool connected() const = 0;
};

/// Same framing as the socket transport, without the socket. Counts every
/// frame handed to the node so tests can assert what reached it.
class InMemoryNodeConnection final : public NodeConnection {
public:
    explicit InMemoryNodeConnection(node::NodeEndpoint& endpoint) : endpoint_(endpoint) {}

    wire::Frame exchange(const wire::Frame& frame, std::chrono::milliseconds timeout) override;
    bool connected() const override { return !dropped_.load(); }

    void drop() { dropped_ = true; }
    void restore() { dropped_ = false; }
    std::size_t frames_delivered() const { return frames_.load(); }

private:
    node::NodeEndpoint& endpoint_;
    std::atomic<bool> dropped_{false};
    std::atomic<std::size_t> frames_{0};
};

}  // namespace clawnet::orchestrator

#pragma once

#include "clawnet/wire/frame.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>

namespace clawnet::net {

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { close(); }
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    void close();
    /// Unblocks pending reads in other threads.
    void shutdown();

private:
    int fd_ = -1;
};

/// Listening TCP socket on host:port (port 0 picks one).
Socket listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Socket& s);
/// Error(NodeUnavailable) when the connection is refused.
Socket connect_tcp(const std::string& host, std::uint16_t port);

/// "host:port" -> parts; Error(InvalidArgument) when malformed.
std::pair<std::string, std::uint16_t> split_address(const std::string& address);

/// Writes one length-prefixed frame; false when the peer is gone.
bool write_frame(int fd, const wire::Frame& frame);

/// Reads frames from a stream socket.
class FrameReader {
public:
    explicit FrameReader(int fd) : fd_(fd) {}
    /// Next frame, or nullopt at end of stream. Error(ProtocolError) on
    /// malformed input.
    std::optional<wire::Frame> next();

private:
    int fd_;
    wire::FrameDecoder decoder_;
};

/// Fixed-capacity blocking queue; close() wakes every waiter.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    bool push(T value) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(value));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T v = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return v;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::size_t capacity_;
    std::mutex mu_;
    std::condition_variable not_full_, not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace clawnet::net

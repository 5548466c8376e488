#include "clawnet/net/node_transport.hpp"

#include "clawnet/common/error.hpp"

#include <sys/socket.h>
#include <unistd.h>

namespace clawnet::net {

wire::Frame SocketNodeConnection::exchange(const wire::Frame& frame, std::chrono::milliseconds timeout) {
    std::future<wire::Frame> reply;
    {
        std::lock_guard lock(mu_);
        if (!connected_) fail(Errc::NodeUnavailable, "node disconnected");
        reply = waiting_[frame.msg_id].get_future();
    }
    bool sent;
    {
        std::lock_guard lock(write_mu_);
        sent = write_frame(fd_, frame);
    }
    if (!sent) {
        disconnect();
        fail(Errc::NodeUnavailable, "node connection lost");
    }
    if (reply.wait_for(timeout) != std::future_status::ready) {
        std::lock_guard lock(mu_);
        waiting_.erase(frame.msg_id);
        fail(Errc::Timeout, "no reply to " + frame.msg_id + " within " + std::to_string(timeout.count()) + " ms");
    }
    return reply.get();
}

void SocketNodeConnection::deliver(const wire::Frame& reply) {
    std::lock_guard lock(mu_);
    auto it = waiting_.find(reply.msg_id);
    if (it == waiting_.end()) return;
    it->second.set_value(reply);
    waiting_.erase(it);
}

void SocketNodeConnection::disconnect() {
    std::lock_guard lock(mu_);
    connected_ = false;
    for (auto& [id, p] : waiting_)
        p.set_exception(std::make_exception_ptr(Error(Errc::NodeUnavailable, "node disconnected")));
    waiting_.clear();
}

NodeListener::NodeListener(orchestrator::Orchestrator& orch, const std::string& host, std::uint16_t port,
                           Authorize authorize)
    : orch_(orch), authorize_(std::move(authorize)), listen_(listen_tcp(host, port)) {
    port_ = local_port(listen_);
    acceptor_ = std::thread([this] { accept_loop(); });
}

NodeListener::~NodeListener() { stop(); }

void NodeListener::stop() {
    if (stopping_.exchange(true)) return;
    listen_.shutdown();
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& t : workers)
        if (t.joinable()) t.join();
    listen_.close();
}

bool NodeListener::wait_registered(const NodeId& node, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return registered_cv_.wait_for(lock, timeout, [&] { return registered_.count(node) != 0; });
}

void NodeListener::accept_loop() {
    while (!stopping_) {
        int fd = ::accept4(listen_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (stopping_) return;
            if (errno == EINTR) continue;
            return;
        }
        std::lock_guard lock(mu_);
        if (stopping_) {
            ::close(fd);
            return;
        }
        open_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve(fd); });
    }
}

void NodeListener::serve(int fd) {
    Socket sock(fd);
    FrameReader reader(fd);
    std::shared_ptr<SocketNodeConnection> conn;
    NodeId node;
    try {
        auto first = reader.next();
        if (!first) return;
        wire::Frame ack;
        ack.kind = wire::FrameKind::REGISTER_NODE;
        ack.msg_id = first->msg_id;
        ack.issuer = "orchestrator";
        if (first->kind != wire::FrameKind::REGISTER_NODE) {
            ack.set("status", "error").set("error", "ProtocolError");
            write_frame(fd, ack);
            return;
        }
        if (authorize_ && !authorize_(*first)) {
            ack.set("status", "error").set("error", "NotOwner").set("detail", "bad node token");
            write_frame(fd, ack);
            return;
        }
        conn = std::make_shared<SocketNodeConnection>(fd);
        try {
            orch_.register_node(*first, conn);
        } catch (const Error& e) {
            ack.set("status", "error").set("error", std::string(to_string(e.code()))).set("detail", e.what());
            write_frame(fd, ack);
            return;
        }
        node = NodeId(first->get("node"));
        ack.set("status", "ok");
        write_frame(fd, ack);
        {
            std::lock_guard lock(mu_);
            registered_.insert(node);
        }
        registered_cv_.notify_all();
        while (auto f = reader.next()) {
            if (f->kind == wire::FrameKind::DIRECTIVE_RESULT) conn->deliver(*f);
        }
    } catch (const std::exception&) {
    }
    if (conn) {
        conn->disconnect();
        orch_.unregister_node(node);
        std::lock_guard lock(mu_);
        registered_.erase(node);
    }
    std::lock_guard lock(mu_);
    std::erase(open_fds_, fd);
}

NodeClient::NodeClient(node::NodeEndpoint& endpoint, std::string host, std::uint16_t port)
    : endpoint_(endpoint), host_(std::move(host)), port_(port) {}

NodeClient::~NodeClient() { stop(); }

void NodeClient::start() {
    if (thread_.joinable()) return;
    stopping_ = false;
    thread_ = std::thread([this] { run(); });
}

void NodeClient::stop() {
    stopping_ = true;
    {
        std::lock_guard lock(mu_);
        if (current_fd_ >= 0) ::shutdown(current_fd_, SHUT_RDWR);
        cv_.notify_all();
    }
    if (thread_.joinable()) thread_.join();
}

bool NodeClient::wait_connected(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return connected_.load(); });
}

std::string NodeClient::last_error() const {
    std::lock_guard lock(mu_);
    return last_error_;
}

void NodeClient::run() {
    auto backoff = std::chrono::milliseconds(50);
    while (!stopping_) {
        try {
            Socket sock = connect_tcp(host_, port_);
            {
                std::lock_guard lock(mu_);
                current_fd_ = sock.fd();
            }
            serve(sock);
            backoff = std::chrono::milliseconds(50);
        } catch (const std::exception& e) {
            std::lock_guard lock(mu_);
            last_error_ = e.what();
        }
        {
            std::lock_guard lock(mu_);
            current_fd_ = -1;
        }
        connected_ = false;
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, backoff, [&] { return stopping_.load(); });
        backoff = std::min(backoff * 2, std::chrono::milliseconds(5000));
    }
}

void NodeClient::serve(Socket& sock) {
    if (!write_frame(sock.fd(), endpoint_.registration_frame())) return;
    FrameReader reader(sock.fd());
    auto ack = reader.next();
    if (!ack || ack->get("status") != "ok") {
        std::lock_guard lock(mu_);
        last_error_ = ack ? ack->get("error") + ": " + ack->get("detail") : "connection closed during registration";
        return;
    }
    {
        std::lock_guard lock(mu_);
        connected_ = true;
        last_error_.clear();
    }
    cv_.notify_all();

    BoundedQueue<wire::Frame> queue(64);
    std::thread executor([&] {
        while (auto f = queue.pop()) {
            wire::Frame reply;
            try {
                reply = endpoint_.handle_frame(*f);
            } catch (const std::exception& e) {
                wire::DirectiveResult r;
                r.msg_id = f->msg_id;
                r.result = governance::AuditResult::failed_exec;
                r.error = Errc::ExecFailure;
                r.detail = e.what();
                reply = wire::to_frame(r, endpoint_.config().node_id.str(), f->session);
            }
            if (!write_frame(sock.fd(), reply)) break;
        }
    });
    try {
        while (auto f = reader.next()) {
            if (f->kind != wire::FrameKind::DIRECTIVE) continue;
            if (!queue.push(std::move(*f))) break;
        }
    } catch (const std::exception&) {
    }
    queue.close();
    executor.join();
}

}  // namespace clawnet::net

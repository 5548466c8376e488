#include "clawnet/net/socket.hpp"

#include "clawnet/common/error.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace clawnet::net {

Socket& Socket::operator=(Socket&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = o.fd_;
        o.fd_ = -1;
    }
    return *this;
}

void Socket::close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

void Socket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

namespace {
addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    auto service = std::to_string(port);
    if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
        fail(Errc::InvalidArgument, "cannot resolve '" + host + "'");
    return res;
}
}  // namespace

Socket listen_tcp(const std::string& host, std::uint16_t port) {
    auto* ai = resolve(host, port, true);
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    int rc = ::bind(s.fd(), ai->ai_addr, ai->ai_addrlen);
    ::freeaddrinfo(ai);
    if (rc != 0) fail(Errc::InvalidArgument, std::string("bind failed: ") + std::strerror(errno));
    if (::listen(s.fd(), 16) != 0) fail(Errc::InvalidArgument, std::string("listen failed: ") + std::strerror(errno));
    return s;
}

std::uint16_t local_port(const Socket& s) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
}

Socket connect_tcp(const std::string& host, std::uint16_t port) {
    auto* ai = resolve(host, port, false);
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    int rc = ::connect(s.fd(), ai->ai_addr, ai->ai_addrlen);
    ::freeaddrinfo(ai);
    if (rc != 0) fail(Errc::NodeUnavailable, "connect to " + host + ":" + std::to_string(port) + " failed");
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
    auto colon = address.rfind(':');
    if (colon == std::string::npos) fail(Errc::InvalidArgument, "address '" + address + "' needs host:port");
    try {
        auto port = std::stoul(address.substr(colon + 1));
        if (port > 65535) throw std::out_of_range("port");
        return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
    } catch (const std::exception&) {
        fail(Errc::InvalidArgument, "bad port in '" + address + "'");
    }
}

bool write_frame(int fd, const wire::Frame& frame) {
    auto bytes = wire::encode_frame(frame);
    std::size_t off = 0;
    while (off < bytes.size()) {
        auto n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

std::optional<wire::Frame> FrameReader::next() {
    for (;;) {
        if (auto f = decoder_.next()) return f;
        char buf[8192];
        auto n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return std::nullopt;
        decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
}

}  // namespace clawnet::net

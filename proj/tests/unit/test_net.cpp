#include "clawnet/common/error.hpp"
#include "clawnet/net/node_transport.hpp"
#include "clawnet/net/socket.hpp"
#include "support/fixture.hpp"

#include <doctest.h>

#include <sys/socket.h>
#include <unistd.h>

#include <thread>

using namespace clawnet;
using namespace std::chrono_literals;
using governance::AuditResult;
using governance::OpKind;
using testsupport::TempDir;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::InvalidArgument;
}

struct Net {
    TempDir dir;
    testsupport::World w;
    IdentityId a;
    std::unique_ptr<net::NodeListener> listener;
    std::unique_ptr<node::NodeEndpoint> endpoint;
    std::unique_ptr<net::NodeClient> client;

    explicit Net(net::NodeListener::Authorize auth = {}) {
        w.add_users({"u1"});
        a = w.identity("u1", "work", "/home/u1/work:mutative", {});
        testsupport::write_file(testsupport::under(dir.path(), "/home/u1/work/a.txt"), "v1");
        listener = std::make_unique<net::NodeListener>(*w.orch, "127.0.0.1", 0, std::move(auth));
        endpoint = std::make_unique<node::NodeEndpoint>(
            testsupport::node_config("u1", {"/home/u1/work"}, dir.path()), w.clock, nullptr, false);
        client = std::make_unique<net::NodeClient>(*endpoint, "127.0.0.1", listener->port());
    }
    ~Net() {
        client->stop();
        listener->stop();
    }
    wire::DirectiveResult read(const std::string& path) {
        governance::Operation op;
        op.kind = OpKind::read;
        op.targets = {path};
        op.issuer = a;
        return w.orch->proxy_directive(op);
    }
};

}  // namespace

TEST_CASE("address parsing") {
    CHECK(net::split_address("127.0.0.1:7400") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 7400});
    CHECK(code_of([] { net::split_address("nohost"); }) == Errc::InvalidArgument);
    CHECK(code_of([] { net::split_address("h:99999"); }) == Errc::InvalidArgument);
    CHECK(code_of([] { net::split_address("h:x"); }) == Errc::InvalidArgument);
}

TEST_CASE("frames survive a real socket pair, and garbage is a protocol error") {
    int sv[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) == 0);
    net::Socket a(sv[0]), b(sv[1]);
    wire::Frame f;
    f.kind = wire::FrameKind::SESSION_TURN;
    f.msg_id = "m1";
    f.set("content", std::string(100000, 'z'));
    std::thread writer([&] {
        for (int i = 0; i < 3; ++i) net::write_frame(a.fd(), f);
        a.shutdown();
    });
    net::FrameReader reader(b.fd());
    for (int i = 0; i < 3; ++i) {
        auto got = reader.next();
        REQUIRE(got.has_value());
        CHECK(got->get("content").size() == 100000);
    }
    CHECK_FALSE(reader.next().has_value());
    writer.join();

    int sv2[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv2) == 0);
    net::Socket c(sv2[0]), d(sv2[1]);
    const char junk[] = {0, 0, 0, 5, 'h', 'e', 'l', 'l', 'o'};
    REQUIRE(::write(c.fd(), junk, sizeof junk) == static_cast<ssize_t>(sizeof junk));
    net::FrameReader bad(d.fd());
    CHECK(code_of([&] { bad.next(); }) == Errc::ProtocolError);
}

TEST_CASE("bounded queue blocks at capacity and drains after close") {
    net::BoundedQueue<int> q(2);
    CHECK(q.push(1));
    CHECK(q.push(2));
    std::atomic<bool> pushed{false};
    std::thread t([&] {
        q.push(3);
        pushed = true;
    });
    std::this_thread::sleep_for(50ms);
    CHECK_FALSE(pushed.load());
    CHECK(q.pop() == 1);
    t.join();
    CHECK(pushed.load());
    q.close();
    CHECK(q.pop() == 2);
    CHECK(q.pop() == 3);
    CHECK_FALSE(q.pop().has_value());
    CHECK_FALSE(q.push(4));
}

TEST_CASE("connecting to a closed port is NodeUnavailable") {
    auto s = net::listen_tcp("127.0.0.1", 0);
    auto port = net::local_port(s);
    s.close();
    CHECK(code_of([&] { net::connect_tcp("127.0.0.1", port); }) == Errc::NodeUnavailable);
}

TEST_CASE("a node registers over TCP and executes directives") {
    Net n;
    n.client->start();
    REQUIRE(n.client->wait_connected(10s));
    REQUIRE(n.listener->wait_registered(NodeId("u1-node"), 10s));
    CHECK(n.w.orch->node_of(UserId("u1")) == NodeId("u1-node"));
    auto r = n.read("/home/u1/work/a.txt");
    CHECK(r.executed());
    CHECK(r.content == "v1");

    // several exchanges in flight at once all find their replies
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&] {
            for (int k = 0; k < 10; ++k) ok += n.read("/home/u1/work/a.txt").content == "v1";
        });
    for (auto& t : threads) t.join();
    CHECK(ok.load() == 80);
    CHECK(n.endpoint->audit().size() == 81);
}

TEST_CASE("a dropped node fails directives instead of hanging") {
    Net n;
    n.client->start();
    REQUIRE(n.listener->wait_registered(NodeId("u1-node"), 10s));
    n.client->stop();
    for (int i = 0; i < 100 && n.read("/home/u1/work/a.txt").error != Errc::NodeUnavailable; ++i)
        std::this_thread::sleep_for(20ms);
    auto r = n.read("/home/u1/work/a.txt");
    CHECK(r.result == AuditResult::failed_exec);
    CHECK(r.error == Errc::NodeUnavailable);
    CHECK(n.w.orch->governance().log(UserId("u1")).records().back().ext_value("error") == "NodeUnavailable");
}

TEST_CASE("registration can be refused") {
    Net n([](const wire::Frame& f) { return f.get("token") == "right"; });
    n.client->start();
    for (int i = 0; i < 200 && n.client->last_error().empty(); ++i) std::this_thread::sleep_for(10ms);
    CHECK_FALSE(n.client->last_error().empty());
    CHECK_FALSE(n.w.orch->node_of(UserId("u1")).has_value());
}

#include "clawnet/common/error.hpp"
#include "clawnet/governance/audit.hpp"
#include "clawnet/node/config.hpp"
#include "clawnet/node/endpoint.hpp"
#include "clawnet/node/l2.hpp"
#include "clawnet/node/tree_hash.hpp"
#include "support/fixture.hpp"
#include "support/oracles.hpp"
#include "support/random_ops.hpp"

#include <doctest.h>

using namespace clawnet;
using namespace clawnet::node;
using governance::AuditResult;
using governance::DenyReason;
using governance::OpKind;
using testsupport::read_file;
using testsupport::TempDir;
using testsupport::write_file;
namespace fs = std::filesystem;

namespace {

struct Node {
    TempDir dir;
    VirtualClock clock;
    RecordingSink sink;
    NodeConfig cfg;
    std::unique_ptr<NodeEndpoint> ep;
    int msg = 0;

    explicit Node(std::vector<std::string> whitelist = {"/home/li/work"}) {
        cfg = testsupport::node_config("li", std::move(whitelist), dir.path());
        write_file(phys("/home/li/work/a.txt"), "v1");
        write_file(phys("/home/li/work/specs/req.md"), "requirements");
        write_file(phys("/home/li/private/diary.md"), "secret");
        write_file(phys("/etc/passwd"), "root:x:0:0");
        open();
    }
    void open() { ep = std::make_unique<NodeEndpoint>(cfg, clock, &sink, false); }
    fs::path phys(const std::string& logical) const { return testsupport::under(dir.path(), logical); }

    wire::DirectiveResult run(OpKind k, std::vector<std::string> targets, std::string content = {}) {
        wire::Directive d;
        d.msg_id = "msg-" + std::to_string(++msg);
        d.op.kind = k;
        d.op.targets = std::move(targets);
        d.op.issuer = IdentityId("li/work-0000");
        if (k == OpKind::write) d.op.payload_digest = sha256_hex(content);
        d.content = std::move(content);
        return ep->handle(d);
    }
    std::string work_hash() const { return tree_hash(phys("/home/li/work")); }
};

governance::Operation op(OpKind k, std::vector<std::string> t) {
    governance::Operation o;
    o.kind = k;
    o.targets = std::move(t);
    return o;
}

}  // namespace

TEST_CASE("node config file parsing and validation") {
    std::istringstream in(
        "# li's laptop\n"
        "node_id = li-node\n"
        "owner = li\n"
        "whitelist = /home/li/work, /home/li/docs\n"
        "whitelist = /srv/share\n"
        "staging_root = /var/clawnet/li/staging\n"
        "backup_root = /var/clawnet/li/backup\n"
        "server = 127.0.0.1:7400\n"
        "token = t-li\n");
    auto c = parse_node_config(in);
    CHECK(c.node_id == NodeId("li-node"));
    CHECK(c.owner == UserId("li"));
    CHECK(c.whitelist == std::vector<std::string>{"/home/li/work", "/home/li/docs", "/srv/share"});
    CHECK(c.server_address == "127.0.0.1:7400");
    CHECK(c.token == "t-li");
    CHECK(c.fs_root == "/");
    CHECK(c.physical("/home/li/work") == "/home/li/work");

    auto bad = c;
    bad.backup_root = "/home/li/work/.backup";
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.whitelist.push_back("/var/clawnet");
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.whitelist.push_back("/home/li/../x");
    CHECK_THROWS_AS(bad.validate(), Error);
    std::istringstream unknown("colour = blue\n");
    CHECK_THROWS_AS(parse_node_config(unknown), Error);
}

TEST_CASE("the shipped sample node config is valid") {
    auto cfg = load_node_config(fs::path(CLAWNET_CONFIG_DIR) / "node.example.conf");
    CHECK(cfg.node_id == NodeId("li-node"));
    CHECK(cfg.whitelist == std::vector<std::string>{"/home/li/work", "/home/li/shared"});
    CHECK(cfg.server_address == "127.0.0.1:7400");
    CHECK(cfg.fs_root == fs::path("/"));
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("authorize_l2 examples") {
    Node n;
    CHECK(authorize_l2(op(OpKind::write, {"/home/li/work/new.md"}), n.cfg).allowed);
    auto etc = authorize_l2(op(OpKind::write, {"/etc/passwd"}), n.cfg);
    CHECK_FALSE(etc.allowed);
    CHECK(etc.reason == DenyReason::outside_whitelist);
    CHECK(authorize_l2(op(OpKind::read, {"/home/li/work/../private/diary.md"}), n.cfg).reason ==
          DenyReason::outside_whitelist);
    CHECK(authorize_l2(op(OpKind::read, {"relative"}), n.cfg).reason == DenyReason::malformed);
    CHECK(authorize_l2(op(OpKind::move, {"/home/li/work/a.txt"}), n.cfg).reason == DenyReason::malformed);

    fs::create_directory_symlink("../private", n.phys("/home/li/work/escape"));
    auto link = authorize_l2(op(OpKind::write, {"/home/li/work/escape/diary.md"}), n.cfg);
    CHECK_FALSE(link.allowed);
    CHECK(link.reason == DenyReason::symlink_escape);
    CHECK(link.detail.find(n.dir.path().string()) == std::string::npos);

    // a link that stays inside the whitelist is fine
    fs::create_directory_symlink("specs", n.phys("/home/li/work/alias"));
    CHECK(authorize_l2(op(OpKind::read, {"/home/li/work/alias/req.md"}), n.cfg).allowed);
}

TEST_CASE("staging and backup roots are refused even when whitelisted") {
    Node n;
    auto cfg = n.cfg;
    cfg.whitelist.push_back("/var/clawnet/li");  // misconfiguration, bypassing validate()
    for (const auto& t : {"/var/clawnet/li/backup/audit.log", "/var/clawnet/li/staging/x", "/var/clawnet/li/backup",
                          "/var/clawnet/li"}) {
        auto d = authorize_l2(op(OpKind::remove, {t}), cfg);
        INFO(t);
        CHECK_FALSE(d.allowed);
    }
    // and through a symlink planted inside the whitelist
    fs::create_directory_symlink(n.phys("/var/clawnet/li/backup"), n.phys("/home/li/work/bk"));
    CHECK_FALSE(authorize_l2(op(OpKind::remove, {"/home/li/work/bk/audit.log"}), n.cfg).allowed);
}

TEST_CASE("L2 deny leaves the file system untouched and is logged") {
    Node n;
    auto before = oracle::snapshot(n.dir.path() / "home");
    auto r = n.run(OpKind::write, {"/etc/passwd"}, "pwned");
    CHECK(r.result == AuditResult::denied_l2);
    CHECK(r.deny_reason == DenyReason::outside_whitelist);
    CHECK(read_file(n.phys("/etc/passwd")) == "root:x:0:0");
    CHECK(oracle::snapshot(n.dir.path() / "home") == before);
    auto recs = n.ep->audit().records();
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].result == AuditResult::denied_l2);
    CHECK(recs[0].ext_value("reason") == "outside_whitelist");
    CHECK(n.ep->executed_count() == 0);
}

TEST_CASE("read, list and stat") {
    Node n;
    auto r = n.run(OpKind::read, {"/home/li/work/a.txt"});
    CHECK(r.executed());
    CHECK(r.content == "v1");
    auto l = n.run(OpKind::list, {"/home/li/work"});
    CHECK(l.entries == std::vector<std::string>{"a.txt", "specs/"});
    auto s = n.run(OpKind::stat, {"/home/li/work/a.txt"});
    CHECK(field(s.metadata, "kind") == "file");
    CHECK(field(s.metadata, "size") == "2");
    CHECK(field(s.metadata, "mtime").has_value());
    auto missing = n.run(OpKind::read, {"/home/li/work/none"});
    CHECK(missing.result == AuditResult::failed_exec);
    CHECK(missing.error == Errc::NotFound);
    CHECK(missing.detail.find(n.dir.path().string()) == std::string::npos);
}

TEST_CASE("write over an existing file preserves the original") {
    Node n;
    auto r = n.run(OpKind::write, {"/home/li/work/a.txt"}, "v2");
    REQUIRE(r.executed());
    CHECK(read_file(n.phys("/home/li/work/a.txt")) == "v2");
    auto bk = n.ep->backups().find(r.backup_id);
    REQUIRE(bk.has_value());
    CHECK(bk->original_path == "/home/li/work/a.txt");
    CHECK(bk->backup_path.rfind("/var/clawnet/li/backup/2026-03-01/", 0) == 0);
    CHECK(read_file(n.phys(bk->backup_path)) == "v1");
    auto recs = n.ep->audit().records();
    CHECK(recs.back().ext_value("backup") == r.backup_id);

    auto fresh = n.run(OpKind::write, {"/home/li/work/new.md"}, "n");
    CHECK(fresh.backup_id == "fresh");
    CHECK(n.ep->audit().records().back().ext_value("backup") == "fresh");

    wire::Directive tampered;
    tampered.msg_id = "x";
    tampered.op.kind = OpKind::write;
    tampered.op.targets = {"/home/li/work/a.txt"};
    tampered.op.payload_digest = sha256_hex("something else");
    tampered.content = "v3";
    CHECK(n.ep->handle(tampered).result == AuditResult::failed_exec);
    CHECK(read_file(n.phys("/home/li/work/a.txt")) == "v2");
}

TEST_CASE("delete stages under staging_root/<ts>-<seq>/<original path>") {
    Node n;
    n.clock.set_tick(5);
    auto r = n.run(OpKind::remove, {"/home/li/work/a.txt"});
    REQUIRE(r.executed());
    CHECK_FALSE(fs::exists(n.phys("/home/li/work/a.txt")));
    auto staged = n.ep->audit().records().back().ext_value("staged");
    REQUIRE(staged.has_value());
    CHECK(*staged == "/var/clawnet/li/staging/20260301T000005Z-0/home/li/work/a.txt");
    CHECK(read_file(n.phys(*staged)) == "v1");
}

TEST_CASE("copy with a missing source fails without a backup") {
    Node n;
    auto r = n.run(OpKind::copy, {"/home/li/work/none", "/home/li/work/b"});
    CHECK(r.result == AuditResult::failed_exec);
    CHECK(r.error == Errc::NotFound);
    CHECK(n.ep->backups().all().empty());
    CHECK(n.ep->audit().records().back().result == AuditResult::failed_exec);
    CHECK_FALSE(fs::exists(n.phys("/home/li/work/b")));
    auto dup = n.run(OpKind::mkdir, {"/home/li/work/specs"});
    CHECK(dup.error == Errc::AlreadyExists);
    auto into = n.run(OpKind::copy, {"/home/li/work/a.txt", "/home/li/work/specs"});
    CHECK(into.error == Errc::AlreadyExists);
}

TEST_CASE("undo(1) after an overwrite restores the original bytes") {
    Node n;
    n.run(OpKind::write, {"/home/li/work/a.txt"}, "v2");
    auto rep = n.ep->undo(1);
    REQUIRE(rep.reversed.size() == 1);
    CHECK(rep.skipped.empty());
    CHECK(read_file(n.phys("/home/li/work/a.txt")) == "v1");
    auto last = n.ep->audit().records().back();
    CHECK(last.ext_value("reverts") == "0");
    CHECK(last.ext_value("mode") == "undo");
    CHECK(last.identity == IdentityId("li/@owner"));
    CHECK(n.ep->undo(1).reversed.empty());
}

TEST_CASE("write, move, delete then rollback restores the tree") {
    Node n;
    auto initial = n.work_hash();
    auto snap = oracle::snapshot(n.phys("/home/li/work"));
    REQUIRE(n.run(OpKind::write, {"/home/li/work/a.txt"}, "v2").executed());
    REQUIRE(n.run(OpKind::move, {"/home/li/work/a.txt", "/home/li/work/specs/a.txt"}).executed());
    REQUIRE(n.run(OpKind::remove, {"/home/li/work/specs"}).executed());
    CHECK(n.work_hash() != initial);
    auto rep = n.ep->rollback(0);
    CHECK(rep.reversed.size() == 3);
    CHECK(rep.skipped.empty());
    CHECK(rep.reversed[0].seq == 2);
    CHECK(rep.reversed[2].seq == 0);
    CHECK(n.work_hash() == initial);
    CHECK(oracle::snapshot(n.phys("/home/li/work")) == snap);
    CHECK(n.ep->audit().verify().ok);
}

TEST_CASE("an external edit after a logged write is skipped, never clobbered") {
    Node n;
    n.run(OpKind::write, {"/home/li/work/a.txt"}, "v2");
    write_file(n.phys("/home/li/work/a.txt"), "edited by hand");
    auto rep = n.ep->undo(1);
    CHECK(rep.reversed.empty());
    REQUIRE(rep.skipped.size() == 1);
    CHECK(rep.skipped[0].reason == Errc::ConflictingLaterEdit);
    CHECK(read_file(n.phys("/home/li/work/a.txt")) == "edited by hand");
}

TEST_CASE("undo refuses a tampered local log") {
    Node n;
    n.run(OpKind::write, {"/home/li/work/a.txt"}, "v2");
    auto log = n.phys("/var/clawnet/li/backup/audit.log");
    auto text = read_file(log);
    text[text.find("a.txt")] = 'b';
    write_file(log, text);
    try {
        n.ep->undo(1);
        FAIL("undo ran on a broken chain");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ChainBroken);
    }
    CHECK(read_file(n.phys("/home/li/work/a.txt")) == "v2");
}

TEST_CASE("control frames: owner-only undo and rollback") {
    Node n;
    n.run(OpKind::write, {"/home/li/work/a.txt"}, "v2");
    n.run(OpKind::mkdir, {"/home/li/work/x"});
    wire::Frame f;
    f.kind = wire::FrameKind::DIRECTIVE;
    f.msg_id = "c1";
    f.issuer = "li/work-0000";
    f.set("control", "rollback").set("to_seq", "0");
    auto denied = wire::result_from_frame(n.ep->handle_frame(f));
    CHECK(denied.error == Errc::NotOwner);
    CHECK(fs::exists(n.phys("/home/li/work/x")));

    f.issuer = "li/@owner";
    auto ok = wire::result_from_frame(n.ep->handle_frame(f));
    CHECK(ok.executed());
    CHECK(ok.entries == std::vector<std::string>{"reversed:1:mkdir", "reversed:0:write"});
    CHECK(read_file(n.phys("/home/li/work/a.txt")) == "v1");
}

TEST_CASE("registration frame advertises the nine primitives") {
    Node n;
    auto f = n.ep->registration_frame();
    CHECK(f.kind == wire::FrameKind::REGISTER_NODE);
    CHECK(f.get("owner") == "li");
    CHECK(f.get("node") == "li-node");
    std::vector<std::string> caps;
    for (const auto& [k, v] : f.body)
        if (k == "capability") caps.push_back(v);
    CHECK(caps == std::vector<std::string>{"read", "list", "stat", "write", "move", "rename", "copy", "mkdir",
                                           "delete"});
}

TEST_CASE("every executed mutation links a backup or the fresh marker; chain survives restart") {
    Node n;
    testsupport::RandomOps ops(77, n.dir.path(), "/home/li/work");
    for (int i = 0; i < 40; ++i) n.ep->handle(ops.next());
    for (const auto& r : n.ep->audit().records()) {
        auto k = governance::parse_op_kind(r.action);
        if (!k || !governance::is_mutative(*k) || r.result != AuditResult::allowed_executed) continue;
        auto b = r.ext_value("backup");
        REQUIRE(b.has_value());
        if (*b != "fresh") CHECK(n.ep->backups().find(*b).has_value());
    }
    auto executed = n.ep->executed_count();
    n.open();
    CHECK(n.ep->executed_count() == executed);
    CHECK(n.ep->audit().verify().ok);
    CHECK(governance::verify_file(n.phys("/var/clawnet/li/backup/audit.log")).ok);
}

TEST_CASE("random mutation sequences roll back to a byte-identical tree") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        TempDir dir;
        VirtualClock clock;
        auto cfg = testsupport::node_config("li", {"/home/li/work"}, dir.path());
        testsupport::RandomOps ops(seed, dir.path(), "/home/li/work");
        ops.build_tree();
        auto root = ops.phys("/home/li/work");
        auto initial = tree_hash(root);
        auto snap = oracle::snapshot(root);
        NodeEndpoint ep(cfg, clock, nullptr, false);
        int n = static_cast<int>(seed * 7 % 50) + 1;
        for (int i = 0; i < n; ++i) {
            clock.advance();
            ep.handle(ops.next());
        }
        auto rep = ep.rollback(0);
        INFO("seed " << seed);
        CHECK(rep.skipped.empty());
        CHECK(tree_hash(root) == initial);
        CHECK(oracle::snapshot(root) == snap);
    }
}

TEST_CASE("a crash between backup and mutation never loses the original") {
    for (auto k : {OpKind::write, OpKind::move, OpKind::rename, OpKind::remove}) {
        Node n;
        auto snap = oracle::snapshot(n.phys("/home/li/work"));
        n.ep->set_fault_hook([](std::string_view point) {
            if (point == "after_backup") throw SimulatedCrash{std::string(point)};
        });
        std::vector<std::string> targets = {"/home/li/work/a.txt"};
        if (k == OpKind::move) targets.push_back("/home/li/work/specs/a.txt");
        if (k == OpKind::rename) targets.push_back("/home/li/work/b.txt");
        CHECK_THROWS_AS(n.run(k, targets, "v2"), SimulatedCrash);
        INFO(governance::to_string(k));
        // the mutation never started: original bytes in place and a valid backup
        CHECK(oracle::snapshot(n.phys("/home/li/work")) == snap);
        auto backups = n.ep->backups().all();
        REQUIRE(backups.size() == 1);
        CHECK(read_file(n.phys(backups[0].backup_path)) == "v1");
        // restart: the log holds no record of the crashed directive and still verifies
        n.open();
        CHECK(n.ep->audit().size() == 0);
        CHECK(n.ep->audit().verify().ok);
        CHECK(n.run(OpKind::read, {"/home/li/work/a.txt"}).content == "v1");
    }
}

TEST_CASE("tree_hash ignores mtimes and distinguishes content, names and links") {
    TempDir d;
    write_file(d.path() / "t" / "a", "x");
    auto h = tree_hash(d.path() / "t");
    fs::last_write_time(d.path() / "t" / "a", fs::file_time_type::clock::now() - std::chrono::hours(5));
    CHECK(tree_hash(d.path() / "t") == h);
    write_file(d.path() / "t" / "a", "y");
    CHECK(tree_hash(d.path() / "t") != h);
    write_file(d.path() / "t" / "a", "x");
    CHECK(tree_hash(d.path() / "t") == h);
    fs::rename(d.path() / "t" / "a", d.path() / "t" / "b");
    CHECK(tree_hash(d.path() / "t") != h);
    CHECK(tree_hash(d.path() / "none") == "absent");
    fs::create_symlink("b", d.path() / "t" / "l1");
    auto hl = tree_hash(d.path() / "t");
    fs::remove(d.path() / "t" / "l1");
    fs::create_symlink("c", d.path() / "t" / "l1");
    CHECK(tree_hash(d.path() / "t") != hl);
}

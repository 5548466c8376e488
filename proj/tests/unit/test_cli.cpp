#include "clawnet/common/digest.hpp"
#include "clawnet/node/endpoint.hpp"
#include "support/fixture.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>

using testsupport::read_file;
using testsupport::TempDir;
using testsupport::write_file;
namespace fs = std::filesystem;

namespace {

const std::string kBin = CLAWNET_BIN;
const fs::path kScenarios = CLAWNET_SCENARIOS;
const fs::path kGolden = CLAWNET_GOLDEN;

struct Run {
    int rc = -1;
    std::string out;
};

Run run(const std::string& args) {
    Run r;
    std::string cmd = "'" + kBin + "' " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    while (auto n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    int status = ::pclose(p);
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("sim run against the golden trace exits 0") {
    auto r = run("sim run " + q(kScenarios / "procurement.scenario") + " --golden " + q(kGolden / "procurement.trace"));
    INFO(r.out);
    CHECK(r.rc == 0);
    CHECK(r.out.find("golden: match") != std::string::npos);
}

TEST_CASE("a golden mismatch exits 1 and lists the difference") {
    TempDir d;
    auto g = read_file(kGolden / "procurement.trace");
    auto cut = g.find('\n', g.size() / 2);
    g.erase(cut + 1, g.find('\n', cut + 1) - cut);
    write_file(d.path() / "g.trace", g);
    auto r = run("sim run " + q(kScenarios / "procurement.scenario") + " --golden " + q(d.path() / "g.trace"));
    CHECK(r.rc == 1);
    CHECK(r.out.find("DIFF + [") != std::string::npos);
    CHECK(r.out.find("FAILED") != std::string::npos);
}

TEST_CASE("parse errors exit 2") {
    CHECK(run("sim run /nonexistent.scenario").rc == 2);
    CHECK(run("sim run").rc == 2);
    CHECK(run("frobnicate").rc == 2);
    CHECK(run("audit verify /nonexistent.log").rc == 2);
    CHECK(run("node undo 1").rc == 2);
    TempDir d;
    write_file(d.path() / "bad.scenario", "name: x\ncolour: blue\n");
    CHECK(run("sim run " + q(d.path() / "bad.scenario")).rc == 2);
}

TEST_CASE("audit verify reports the first broken record") {
    TempDir d;
    auto wd = d.path() / "wd";
    REQUIRE(run("sim run " + q(kScenarios / "rollback.scenario") + " --work-dir " + q(wd)).rc == 0);
    auto log = wd / "server" / "audit" / "li.log";
    REQUIRE(fs::exists(log));
    auto ok = run("audit verify " + q(log));
    CHECK(ok.rc == 0);
    CHECK(ok.out == "ok\n");
    auto shown = run("audit show " + q(log) + " --since 1");
    CHECK(shown.rc == 0);
    CHECK(shown.out.rfind("1 ", 0) == 0);

    auto text = read_file(log);
    auto line2 = text.find('\n', text.find('\n') + 1) + 1;
    text[text.find("owner=", line2) + 9] ^= 0x01;
    write_file(log, text);
    auto bad = run("audit verify " + q(log));
    CHECK(bad.rc == 1);
    CHECK(bad.out == "broken_at 2\n");
}

TEST_CASE("node undo works offline from the node config") {
    TempDir d;
    auto cfg = testsupport::node_config("li", {"/home/li/work"}, d.path());
    write_file(testsupport::under(d.path(), "/home/li/work/a.txt"), "v1");
    {
        clawnet::VirtualClock clock;
        clawnet::node::NodeEndpoint ep(cfg, clock, nullptr, false);
        clawnet::wire::Directive w;
        w.msg_id = "m1";
        w.op.kind = clawnet::governance::OpKind::write;
        w.op.targets = {"/home/li/work/a.txt"};
        w.op.payload_digest = clawnet::sha256_hex("v2");
        w.content = "v2";
        REQUIRE(ep.handle(w).executed());
    }
    // fs_root in the file points elsewhere; the flag wins
    write_file(d.path() / "node.conf", "node_id = li-node\nowner = li\nwhitelist = /home/li/work\n"
                                       "staging_root = /var/clawnet/li/staging\nbackup_root = /var/clawnet/li/backup\n"
                                       "fs_root = /nonexistent/root\n");
    CHECK(run("node --config " + q(d.path() / "node.conf") + " --fs-root " + q(d.path()) + " --staging-root relative undo 1").rc == 2);
    auto r = run("node --config " + q(d.path() / "node.conf") + " --fs-root " + q(d.path()) + " undo 1");
    INFO(r.out);
    CHECK(r.rc == 0);
    CHECK(r.out == "reversed 0 write\n");
    CHECK(read_file(testsupport::under(d.path(), "/home/li/work/a.txt")) == "v1");

    // a tampered log refuses to restore
    auto log = testsupport::under(d.path(), "/var/clawnet/li/backup/audit.log");
    auto text = read_file(log);
    text[text.find("write")] = 'W';
    write_file(log, text);
    auto broken = run("node --config " + q(d.path() / "node.conf") + " --fs-root " + q(d.path()) + " rollback 0");
    CHECK(broken.rc == 1);
    CHECK(broken.out.find("ChainBroken") != std::string::npos);
}

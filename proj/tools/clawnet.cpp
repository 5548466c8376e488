#include "clawnet/common/error.hpp"
#include "clawnet/governance/audit.hpp"
#include "clawnet/harness/simulator.hpp"
#include "clawnet/node/config.hpp"
#include "clawnet/node/endpoint.hpp"
#include "clawnet/server/server.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace clawnet;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kParseError = 2;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(Errc::ScenarioParseError, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int sim_run(const std::string& scenario, const std::string& golden, std::optional<std::uint64_t> seed,
            bool write_golden, const std::string& transport, bool strict, const std::string& trace_out,
            const std::string& work_dir) {
    harness::SimOptions opt;
    opt.seed = seed;
    opt.transport = transport == "socket" ? harness::Transport::socket : harness::Transport::memory;
    if (!work_dir.empty()) {
        opt.work_dir = work_dir;
        opt.keep = true;
    }
    auto report = harness::run_scenario(scenario, opt);
    auto text = report.trace.serialize();
    if (!trace_out.empty()) std::ofstream(trace_out, std::ios::binary) << text;
    if (write_golden && !golden.empty()) {
        std::ofstream(golden, std::ios::binary) << text;
        std::cout << "golden written: " << golden << "\n";
    }
    int rc = kOk;
    for (const auto& f : report.failures) {
        std::cout << "FAILED " << f << "\n";
        rc = kVerifyFailed;
    }
    if (!golden.empty() && !write_golden) {
        auto g = harness::EventTrace::parse(read_file(golden));
        auto diffs = harness::diff_trace(report.trace, g,
                                         strict ? harness::DiffMode::strict : harness::DiffMode::permutation_tolerant);
        for (const auto& d : diffs) std::cout << "DIFF " << harness::describe(d) << "\n";
        if (!diffs.empty()) rc = kVerifyFailed;
        else std::cout << "golden: match\n";
    }
    std::cout << "scenario " << fs::path(scenario).filename().string() << ": " << report.trace.size() << " events, "
              << report.ticks << " ticks, " << (rc == kOk ? "ok" : "FAILED") << "\n";
    return rc;
}

int audit_verify(const std::string& log) {
    if (!fs::exists(log)) {
        std::cerr << "no such log: " << log << "\n";
        return kParseError;
    }
    auto st = governance::verify_file(log);
    if (st.ok) {
        std::cout << "ok\n";
        return kOk;
    }
    std::cout << "broken_at " << st.broken_at << "\n";
    return kVerifyFailed;
}

int audit_show(const std::string& log, std::uint64_t since) {
    std::ifstream in(log, std::ios::binary);
    if (!in) {
        std::cerr << "no such log: " << log << "\n";
        return kParseError;
    }
    std::string line;
    std::uint64_t i = 0;
    int rc = kOk;
    while (std::getline(in, line)) {
        auto r = governance::AuditRecord::parse_line(line);
        if (!r) {
            std::cout << i << " <unparseable>\n";
            rc = kVerifyFailed;
        } else if (r->seq >= since) {
            std::cout << r->seq << " " << format_utc(r->timestamp) << " " << r->owner.str() << " "
                      << r->identity.str() << " " << r->action;
            for (const auto& t : r->targets) std::cout << " " << t;
            std::cout << " " << governance::to_string(r->result);
            for (const auto& [k, v] : r->ext) std::cout << " " << k << "=" << v;
            std::cout << "\n";
        }
        ++i;
    }
    return rc;
}

/// Command-line values that replace config file keys.
struct NodeOverrides {
    std::string node_id, owner, staging_root, backup_root, connect, token, fs_root;
    std::vector<std::string> whitelist;

    node::NodeConfig apply(const std::string& config) const {
        node::NodeConfig cfg = config.empty() ? node::NodeConfig{} : node::load_node_config(config);
        if (!node_id.empty()) cfg.node_id = NodeId(node_id);
        if (!owner.empty()) cfg.owner = UserId(owner);
        if (!whitelist.empty()) cfg.whitelist = whitelist;
        if (!staging_root.empty()) cfg.staging_root = staging_root;
        if (!backup_root.empty()) cfg.backup_root = backup_root;
        if (!connect.empty()) cfg.server_address = connect;
        if (!token.empty()) cfg.token = token;
        if (!fs_root.empty()) cfg.fs_root = fs_root;
        return cfg;
    }
};

int node_restore(const node::NodeConfig& cfg, bool undo, std::uint64_t arg, const std::string& server,
                 const std::string& token) {
    node::RestoreReport report;
    if (!server.empty()) {
        report = server::remote_node_restore(server, token, undo, arg);
    } else {
        SystemClock clock;
        node::NodeEndpoint ep(cfg, clock);
        report = undo ? ep.undo(static_cast<std::size_t>(arg)) : ep.rollback(arg);
    }
    for (const auto& r : report.reversed) std::cout << "reversed " << r.seq << " " << r.action << "\n";
    for (const auto& s : report.skipped)
        std::cout << "skipped " << s.seq << " " << to_string(s.reason) << " " << s.detail << "\n";
    return report.skipped.empty() ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clawnet: governed cross-owner agent collaboration"};
    app.require_subcommand(1);

    std::string config;
    auto* server_cmd = app.add_subcommand("server", "run the orchestrator with its node and console listeners");
    server_cmd->add_option("--config", config, "server config file")->required();

    auto* node_cmd = app.add_subcommand("node", "run a node endpoint, or undo/rollback its log");
    node_cmd->add_option("--config", config, "node config file");
    NodeOverrides ov;
    node_cmd->add_option("--node-id", ov.node_id, "overrides node_id");
    node_cmd->add_option("--owner", ov.owner, "overrides owner");
    node_cmd->add_option("--whitelist", ov.whitelist, "replaces the whitelist; repeatable");
    node_cmd->add_option("--staging-root", ov.staging_root, "overrides staging_root");
    node_cmd->add_option("--backup-root", ov.backup_root, "overrides backup_root");
    node_cmd->add_option("--connect", ov.connect, "overrides server (host:port of the node listener)");
    node_cmd->add_option("--node-token", ov.token, "overrides token");
    node_cmd->add_option("--fs-root", ov.fs_root, "overrides fs_root");
    std::string remote, token;
    std::uint64_t count = 1, to_seq = 0;
    auto* undo_cmd = node_cmd->add_subcommand("undo", "reverse the last N mutations");
    undo_cmd->add_option("N", count)->required();
    auto* rollback_cmd = node_cmd->add_subcommand("rollback", "reverse every mutation with seq >= SEQ");
    rollback_cmd->add_option("SEQ", to_seq)->required();
    for (auto* c : {undo_cmd, rollback_cmd}) {
        c->add_option("--server", remote, "console base URL; restore through the orchestrator");
        c->add_option("--token", token, "owner bearer token for --server");
    }

    auto* sim = app.add_subcommand("sim", "deterministic simulator");
    sim->require_subcommand(1);
    auto* run = sim->add_subcommand("run", "run a scenario and evaluate its expectations");
    std::string scenario, golden, transport = "memory", trace_out, work_dir;
    std::optional<std::uint64_t> seed;
    bool write_golden = false, strict = false;
    run->add_option("S", scenario, "scenario file")->required();
    run->add_option("--golden", golden, "golden trace to compare against");
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_flag("--write-golden", write_golden, "record the trace as the new golden");
    run->add_flag("--strict", strict, "order-sensitive diff");
    run->add_option("--transport", transport, "memory | socket")->check(CLI::IsMember({"memory", "socket"}));
    run->add_option("--trace", trace_out, "write the serialized trace here");
    run->add_option("--work-dir", work_dir, "keep the sandbox in this directory");

    auto* audit = app.add_subcommand("audit", "audit log tools");
    audit->require_subcommand(1);
    std::string log;
    std::uint64_t since = 0;
    auto* verify = audit->add_subcommand("verify", "verify a hash chain");
    verify->add_option("LOG", log)->required();
    auto* show = audit->add_subcommand("show", "print records");
    show->add_option("LOG", log)->required();
    show->add_option("--since", since, "first seq to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kParseError;
    }

    try {
        if (*server_cmd) return server::run_server(config);
        if (*node_cmd) {
            if (!remote.empty()) return node_restore({}, undo_cmd->parsed(), undo_cmd->parsed() ? count : to_seq, remote, token);
            auto cfg = ov.apply(config);
            cfg.validate();
            if (*undo_cmd) return node_restore(cfg, true, count, remote, token);
            if (*rollback_cmd) return node_restore(cfg, false, to_seq, remote, token);
            return server::run_node(cfg);
        }
        if (*run) return sim_run(scenario, golden, seed, write_golden, transport, strict, trace_out, work_dir);
        if (*verify) return audit_verify(log);
        if (*show) return audit_show(log, since);
    } catch (const Error& e) {
        std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
        switch (e.code()) {
            case Errc::ScenarioParseError:
            case Errc::InvalidArgument:
            case Errc::ProtocolError:
                return kParseError;
            default:
                return kVerifyFailed;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kVerifyFailed;
    }
    return kOk;
}

#include "clawnet/common/error.hpp"
#include "clawnet/server/server.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace clawnet::server {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    fail(Errc::InvalidArgument, "server config: " + where + ": " + what);
}

void only_keys(const YAML::Node& n, const std::string& where, std::initializer_list<const char*> keys) {
    if (!n.IsMap()) bad(where, "expected a mapping");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& kv : n) {
        auto k = kv.first.as<std::string>();
        if (!ok.count(k)) bad(where, "unknown key '" + k + "'");
    }
}

std::string req(const YAML::Node& n, const char* key, const std::string& where) {
    if (!n[key]) bad(where, std::string("missing '") + key + "'");
    return n[key].as<std::string>();
}

std::vector<std::string> strings(const YAML::Node& n) {
    std::vector<std::string> out;
    if (!n) return out;
    if (n.IsScalar()) return {n.as<std::string>()};
    for (const auto& x : n) out.push_back(x.as<std::string>());
    return out;
}

}  // namespace

ServerConfig parse_server_config(const std::string& text) {
    ServerConfig c;
    try {
        auto root = YAML::Load(text);
        if (!root.IsMap()) bad("config", "expected a mapping");
        only_keys(root, "config",
                  {"host", "node_port", "console_port", "state_dir", "d_max", "max_turns", "approval_deadline_s",
                   "node_timeout_ms", "step_interval_ms", "durable", "users", "identities", "contacts"});
        if (root["host"]) c.host = root["host"].as<std::string>();
        if (root["node_port"]) c.node_port = root["node_port"].as<std::uint16_t>();
        if (root["console_port"]) c.console_port = root["console_port"].as<std::uint16_t>();
        if (root["state_dir"]) c.state_dir = root["state_dir"].as<std::string>();
        if (root["d_max"]) c.d_max = root["d_max"].as<std::size_t>();
        if (root["max_turns"]) c.max_turns = root["max_turns"].as<std::size_t>();
        if (root["approval_deadline_s"]) c.approval_deadline_s = root["approval_deadline_s"].as<std::int64_t>();
        if (root["node_timeout_ms"]) c.node_timeout_ms = root["node_timeout_ms"].as<std::int64_t>();
        if (root["step_interval_ms"]) c.step_interval_ms = root["step_interval_ms"].as<std::int64_t>();
        if (root["durable"]) c.durable = root["durable"].as<bool>();
        for (std::size_t i = 0; root["users"] && i < root["users"].size(); ++i) {
            const auto& u = root["users"][i];
            auto w = "users[" + std::to_string(i) + "]";
            only_keys(u, w, {"id", "roots", "token"});
            c.users.push_back({req(u, "id", w), strings(u["roots"]), req(u, "token", w)});
        }
        for (std::size_t i = 0; root["identities"] && i < root["identities"].size(); ++i) {
            const auto& x = root["identities"][i];
            auto w = "identities[" + std::to_string(i) + "]";
            only_keys(x, w, {"alias", "owner", "tag", "scope", "peers", "policy", "turns"});
            IdentityConfig ic;
            ic.alias = req(x, "alias", w);
            ic.owner = req(x, "owner", w);
            ic.tag = req(x, "tag", w);
            if (x["scope"]) ic.scope = x["scope"].as<std::string>();
            ic.peers = strings(x["peers"]);
            if (x["policy"]) ic.policy = x["policy"].as<std::string>();
            if (ic.policy != "echo" && ic.policy != "llm-adapter" && ic.policy != "none")
                bad(w, "unknown policy '" + ic.policy + "'");
            if (x["turns"]) ic.turns = x["turns"].as<std::size_t>();
            c.identities.push_back(std::move(ic));
        }
        for (std::size_t i = 0; root["contacts"] && i < root["contacts"].size(); ++i) {
            const auto& x = root["contacts"][i];
            auto w = "contacts[" + std::to_string(i) + "]";
            only_keys(x, w, {"a", "b", "a_presents", "b_presents"});
            ContactConfig cc;
            cc.a = req(x, "a", w);
            cc.b = req(x, "b", w);
            if (x["a_presents"]) cc.a_presents = x["a_presents"].as<std::string>();
            if (x["b_presents"]) cc.b_presents = x["b_presents"].as<std::string>();
            c.contacts.push_back(std::move(cc));
        }
    } catch (const YAML::Exception& e) {
        bad("yaml", e.what());
    }
    std::set<std::string> tokens;
    for (const auto& u : c.users)
        if (!tokens.insert(u.token).second) bad("users", "token shared by two users");
    return c;
}

ServerConfig load_server_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail(Errc::InvalidArgument, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_server_config(ss.str());
}

}  // namespace clawnet::server

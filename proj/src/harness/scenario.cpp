#include "clawnet/harness/scenario.hpp"

#include "clawnet/common/error.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace clawnet::harness {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    fail(Errc::ScenarioParseError, where + ": " + what);
}

void only_keys(const YAML::Node& n, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!n.IsMap()) bad(where, "expected a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : n) {
        auto k = kv.first.as<std::string>();
        if (!ok.count(k)) bad(where, "unknown key '" + k + "'");
    }
}

std::string str(const YAML::Node& n, const std::string& where) {
    if (!n || !n.IsScalar()) bad(where, "expected a scalar");
    return n.as<std::string>();
}

std::string req(const YAML::Node& n, const char* key, const std::string& where) {
    if (!n[key]) bad(where, std::string("missing '") + key + "'");
    return str(n[key], where + "." + key);
}

std::string opt(const YAML::Node& n, const char* key, const std::string& where, std::string fallback = {}) {
    return n[key] ? str(n[key], where + "." + key) : fallback;
}

template <typename T>
T num(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        bad(where, "expected a number");
    }
}

bool boolean(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        bad(where, "expected true or false");
    }
}

std::vector<std::string> strings(const YAML::Node& n, const std::string& where) {
    std::vector<std::string> out;
    if (!n) return out;
    if (n.IsScalar()) return {n.as<std::string>()};
    if (!n.IsSequence()) bad(where, "expected a list");
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(str(n[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Fields string_map(const YAML::Node& n, const std::string& where) {
    Fields out;
    if (!n) return out;
    if (!n.IsMap()) bad(where, "expected a mapping");
    for (const auto& kv : n) out.emplace_back(kv.first.as<std::string>(), str(kv.second, where));
    return out;
}

runtime::MemoryWrite memory_write(const YAML::Node& n, const std::string& where) {
    only_keys(n, where, {"layer", "key", "value"});
    runtime::MemoryWrite w;
    auto layer = runtime::parse_memory_layer(opt(n, "layer", where, "factual"));
    if (!layer) bad(where, "unknown memory layer");
    w.layer = *layer;
    w.key = req(n, "key", where);
    w.value = req(n, "value", where);
    return w;
}

runtime::PolicyTurn step(const YAML::Node& n, const std::string& where) {
    only_keys(n, where, {"say", "intent", "end", "remember", "consult", "require_approval", "directives", "spawn"});
    runtime::PolicyTurn t;
    t.content = opt(n, "say", where);
    t.intent = string_map(n["intent"], where + ".intent");
    if (n["end"]) t.end_marker = boolean(n["end"], where + ".end");
    if (n["remember"]) {
        for (std::size_t i = 0; i < n["remember"].size(); ++i)
            t.remember.push_back(memory_write(n["remember"][i], where + ".remember"));
    }
    if (n["consult"]) t.consult = str(n["consult"], where + ".consult");
    if (n["require_approval"]) t.require_approval = str(n["require_approval"], where + ".require_approval");
    if (n["directives"]) {
        for (std::size_t i = 0; i < n["directives"].size(); ++i) {
            const auto& d = n["directives"][i];
            auto w = where + ".directives[" + std::to_string(i) + "]";
            only_keys(d, w, {"op", "targets", "content"});
            runtime::DirectiveRequest r;
            auto kind = governance::parse_op_kind(req(d, "op", w));
            if (!kind) bad(w, "unknown op");
            r.kind = *kind;
            r.targets = strings(d["targets"], w + ".targets");
            r.content = opt(d, "content", w);
            t.directives.push_back(std::move(r));
        }
    }
    if (n["spawn"]) {
        for (std::size_t i = 0; i < n["spawn"].size(); ++i) {
            const auto& s = n["spawn"][i];
            auto w = where + ".spawn[" + std::to_string(i) + "]";
            only_keys(s, w, {"responder", "intent", "as"});
            runtime::SpawnRequest r;
            r.responder = UserId(req(s, "responder", w));
            r.intent = opt(s, "intent", w);
            if (s["as"]) r.as = IdentityId(str(s["as"], w + ".as"));  // alias, resolved by the simulator
            t.spawn.push_back(std::move(r));
        }
    }
    return t;
}

std::vector<runtime::PolicyTurn> steps(const YAML::Node& n, const std::string& where) {
    if (!n.IsSequence()) bad(where, "expected a list of turns");
    std::vector<runtime::PolicyTurn> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(step(n[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

EventPattern pattern(const YAML::Node& n, const std::string& where) {
    if (!n.IsMap()) bad(where, "expected a mapping");
    EventPattern p;
    for (const auto& kv : n) {
        auto k = kv.first.as<std::string>();
        auto v = str(kv.second, where + "." + k);
        if (k == "kind") p.kind = v;
        else p.match.emplace_back(k, v);
    }
    if (p.kind.empty()) bad(where, "pattern needs a kind");
    return p;
}

Expectations expectations(const YAML::Node& n) {
    Expectations e;
    if (!n) return e;
    const std::string where = "expect";
    only_keys(n, where,
              {"sessions", "session_count", "escalations", "manager_deliveries", "routes", "policy_invocations",
               "forbid_cross_boundary", "order", "present", "absent", "trees", "reconcile", "chains_verify"});
    if (n["sessions"]) {
        for (std::size_t i = 0; i < n["sessions"].size(); ++i) {
            const auto& s = n["sessions"][i];
            auto w = where + ".sessions[" + std::to_string(i) + "]";
            only_keys(s, w, {"index", "state", "reason", "turns", "depth"});
            SessionExpectation x;
            x.index = s["index"] ? num<std::size_t>(s["index"], w) : i;
            if (s["state"]) x.state = str(s["state"], w);
            if (s["reason"]) x.reason = str(s["reason"], w);
            if (s["turns"]) x.turns = num<std::size_t>(s["turns"], w);
            if (s["depth"]) x.depth = num<std::size_t>(s["depth"], w);
            e.sessions.push_back(x);
        }
    }
    if (n["session_count"]) e.session_count = num<std::size_t>(n["session_count"], where);
    for (const auto& [k, v] : string_map(n["escalations"], where + ".escalations")) {
        try {
            e.escalations[k] = std::stoul(v);
        } catch (const std::exception&) {
            bad(where + ".escalations", "expected counts");
        }
    }
    if (n["manager_deliveries"]) e.manager_deliveries = num<std::size_t>(n["manager_deliveries"], where);
    for (const auto& [k, v] : string_map(n["routes"], where + ".routes")) e.routes[k] = std::stoul(v);
    for (const auto& [k, v] : string_map(n["policy_invocations"], where + ".policy_invocations"))
        e.policy_invocations[k] = std::stoul(v);
    e.forbid_cross_boundary = strings(n["forbid_cross_boundary"], where + ".forbid_cross_boundary");
    if (n["order"]) {
        for (std::size_t i = 0; i < n["order"].size(); ++i) {
            std::vector<EventPattern> seq;
            const auto& o = n["order"][i];
            for (std::size_t j = 0; j < o.size(); ++j)
                seq.push_back(pattern(o[j], where + ".order[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
            e.order.push_back(std::move(seq));
        }
    }
    if (n["present"])
        for (std::size_t i = 0; i < n["present"].size(); ++i) e.present.push_back(pattern(n["present"][i], where + ".present"));
    if (n["absent"])
        for (std::size_t i = 0; i < n["absent"].size(); ++i) e.absent.push_back(pattern(n["absent"][i], where + ".absent"));
    if (n["trees"]) {
        for (std::size_t i = 0; i < n["trees"].size(); ++i) {
            const auto& t = n["trees"][i];
            auto w = where + ".trees[" + std::to_string(i) + "]";
            only_keys(t, w, {"owner", "path", "hash", "initial"});
            TreeExpectation x;
            x.owner = req(t, "owner", w);
            x.path = req(t, "path", w);
            if (t["hash"]) x.hash = str(t["hash"], w);
            if (t["initial"]) x.initial = boolean(t["initial"], w);
            if (!x.hash && !x.initial) bad(w, "needs hash or initial");
            e.trees.push_back(x);
        }
    }
    if (n["reconcile"]) e.reconcile = boolean(n["reconcile"], where);
    if (n["chains_verify"]) e.chains_verify = boolean(n["chains_verify"], where);
    return e;
}

const std::set<std::string> kActions = {"initiate", "approve", "reject",   "abort",  "rollback", "undo",
                                        "send",     "retire",  "directive", "remove_contact"};

}  // namespace

Scenario parse_scenario(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        bad("yaml", e.what());
    }
    if (!root || !root.IsMap()) bad("scenario", "expected a mapping at top level");
    only_keys(root, "scenario",
              {"name", "seed", "settings", "users", "identities", "contacts", "nodes", "scripts", "owner_actions",
               "expect", "description"});
    try {
        Scenario sc;
        sc.name = opt(root, "name", "scenario", "unnamed");
        if (root["seed"]) sc.seed = num<std::uint64_t>(root["seed"], "seed");
        if (const auto& s = root["settings"]) {
            only_keys(s, "settings", {"d_max", "max_turns", "approval_deadline", "tick_limit"});
            if (s["d_max"]) sc.settings.d_max = num<std::size_t>(s["d_max"], "settings.d_max");
            if (s["max_turns"]) sc.settings.max_turns = num<std::size_t>(s["max_turns"], "settings.max_turns");
            if (s["approval_deadline"])
                sc.settings.approval_deadline = num<std::int64_t>(s["approval_deadline"], "settings.approval_deadline");
            if (s["tick_limit"]) sc.settings.tick_limit = num<std::int64_t>(s["tick_limit"], "settings.tick_limit");
        }
        std::set<std::string> user_ids;
        if (const auto& us = root["users"]) {
            for (std::size_t i = 0; i < us.size(); ++i) {
                auto w = "users[" + std::to_string(i) + "]";
                only_keys(us[i], w, {"id", "roots", "files", "dirs", "symlinks"});
                UserSpec u;
                u.id = req(us[i], "id", w);
                u.roots = strings(us[i]["roots"], w + ".roots");
                for (const auto& [k, v] : string_map(us[i]["files"], w + ".files")) u.files[k] = v;
                u.dirs = strings(us[i]["dirs"], w + ".dirs");
                for (const auto& [k, v] : string_map(us[i]["symlinks"], w + ".symlinks")) u.symlinks[k] = v;
                if (!user_ids.insert(u.id).second) bad(w, "duplicate user " + u.id);
                sc.users.push_back(std::move(u));
            }
        }
        auto known_user = [&](const std::string& u, const std::string& w) {
            if (!user_ids.count(u)) bad(w, "unknown user '" + u + "'");
        };
        std::set<std::string> aliases;
        if (const auto& is = root["identities"]) {
            for (std::size_t i = 0; i < is.size(); ++i) {
                auto w = "identities[" + std::to_string(i) + "]";
                only_keys(is[i], w, {"name", "owner", "tag", "scope", "peers", "policy", "script", "turns", "memory"});
                IdentitySpec x;
                x.name = req(is[i], "name", w);
                x.owner = req(is[i], "owner", w);
                known_user(x.owner, w + ".owner");
                x.tag = req(is[i], "tag", w);
                x.scope = opt(is[i], "scope", w);
                x.peers = strings(is[i]["peers"], w + ".peers");
                for (const auto& p : x.peers) known_user(p, w + ".peers");
                x.policy = opt(is[i], "policy", w, "none");
                if (x.policy != "scripted" && x.policy != "echo" && x.policy != "llm-adapter" && x.policy != "none")
                    bad(w + ".policy", "unknown policy '" + x.policy + "'");
                x.script = opt(is[i], "script", w);
                if (is[i]["turns"]) x.echo_turns = num<std::size_t>(is[i]["turns"], w + ".turns");
                if (is[i]["memory"])
                    for (std::size_t j = 0; j < is[i]["memory"].size(); ++j)
                        x.memory.push_back(memory_write(is[i]["memory"][j], w + ".memory"));
                if (!aliases.insert(x.name).second) bad(w, "duplicate identity name " + x.name);
                sc.identities.push_back(std::move(x));
            }
        }
        if (const auto& cs = root["contacts"]) {
            for (std::size_t i = 0; i < cs.size(); ++i) {
                auto w = "contacts[" + std::to_string(i) + "]";
                only_keys(cs[i], w, {"a", "b", "confirmed", "a_presents", "b_presents"});
                ContactSpec c;
                c.a = req(cs[i], "a", w);
                c.b = req(cs[i], "b", w);
                known_user(c.a, w);
                known_user(c.b, w);
                if (cs[i]["confirmed"]) c.confirmed = boolean(cs[i]["confirmed"], w);
                if (cs[i]["a_presents"]) c.a_presents = str(cs[i]["a_presents"], w);
                if (cs[i]["b_presents"]) c.b_presents = str(cs[i]["b_presents"], w);
                for (const auto* p : {&c.a_presents, &c.b_presents})
                    if (*p && !aliases.count(**p)) bad(w, "unknown identity '" + **p + "'");
                sc.contacts.push_back(std::move(c));
            }
        }
        if (const auto& ns = root["nodes"]) {
            for (std::size_t i = 0; i < ns.size(); ++i) {
                auto w = "nodes[" + std::to_string(i) + "]";
                only_keys(ns[i], w, {"owner", "id", "whitelist", "staging_root", "backup_root"});
                NodeSpec n;
                n.owner = req(ns[i], "owner", w);
                known_user(n.owner, w);
                n.node_id = opt(ns[i], "id", w, n.owner + "-node");
                n.whitelist = strings(ns[i]["whitelist"], w + ".whitelist");
                n.staging_root = opt(ns[i], "staging_root", w, "/var/clawnet/" + n.owner + "/staging");
                n.backup_root = opt(ns[i], "backup_root", w, "/var/clawnet/" + n.owner + "/backup");
                sc.nodes.push_back(std::move(n));
            }
        }
        if (const auto& ss = root["scripts"]) {
            if (!ss.IsMap()) bad("scripts", "expected a mapping of name to turns");
            for (const auto& kv : ss) {
                auto name = kv.first.as<std::string>();
                auto w = "scripts." + name;
                runtime::Script s;
                if (kv.second.IsSequence()) {
                    s.steps = steps(kv.second, w);
                } else {
                    only_keys(kv.second, w, {"steps", "as_initiator", "as_responder"});
                    if (kv.second["steps"]) s.steps = steps(kv.second["steps"], w + ".steps");
                    if (kv.second["as_initiator"]) s.as_initiator = steps(kv.second["as_initiator"], w + ".as_initiator");
                    if (kv.second["as_responder"]) s.as_responder = steps(kv.second["as_responder"], w + ".as_responder");
                }
                sc.scripts[name] = std::move(s);
            }
        }
        for (const auto& x : sc.identities) {
            if (x.policy == "scripted" && !sc.scripts.count(x.script))
                bad("identities." + x.name, "unknown script '" + x.script + "'");
        }
        if (const auto& as = root["owner_actions"]) {
            for (std::size_t i = 0; i < as.size(); ++i) {
                auto w = "owner_actions[" + std::to_string(i) + "]";
                if (!as[i].IsMap()) bad(w, "expected a mapping");
                OwnerAction a;
                for (const auto& kv : as[i]) {
                    auto k = kv.first.as<std::string>();
                    if (k == "at") a.at = num<std::int64_t>(kv.second, w + ".at");
                    else if (k == "do") a.action = str(kv.second, w + ".do");
                    else if (kv.second.IsSequence()) a.list = strings(kv.second, w + "." + k);
                    else a.args[k] = str(kv.second, w + "." + k);
                }
                if (!kActions.count(a.action)) bad(w, "unknown action '" + a.action + "'");
                sc.actions.push_back(std::move(a));
            }
        }
        sc.expect = expectations(root["expect"]);
        return sc;
    } catch (const YAML::Exception& e) {
        bad("yaml", e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail(Errc::ScenarioParseError, "cannot read scenario '" + file.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace clawnet::harness

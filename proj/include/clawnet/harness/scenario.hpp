#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/runtime/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace clawnet::harness {

struct UserSpec {
    std::string id;
    std::vector<std::string> roots;
    /// Logical path -> content, created on the user's node before the run.
    std::map<std::string, std::string> files;
    std::vector<std::string> dirs;
    /// Logical link path -> target (stored verbatim).
    std::map<std::string, std::string> symlinks;
};

struct IdentitySpec {
    /// Scenario-local alias; identity ids are generated.
    std::string name;
    std::string owner;
    std::string tag;
    std::string scope;
    std::vector<std::string> peers;
    /// scripted | echo | llm-adapter | none
    std::string policy = "none";
    std::string script;
    std::size_t echo_turns = 0;
    std::vector<runtime::MemoryWrite> memory;
};

struct ContactSpec {
    std::string a, b;
    bool confirmed = true;
    std::optional<std::string> a_presents, b_presents;
};

struct NodeSpec {
    std::string owner;
    std::string node_id;
    std::vector<std::string> whitelist;
    std::string staging_root;
    std::string backup_root;
};

/// One owner command at a virtual-clock tick. Applied at the first tick
/// >= `at` where it can apply (approve/reject wait for a matching request).
struct OwnerAction {
    std::int64_t at = 0;
    std::string action;
    /// Remaining keys as given (owner, identity, responder, intent, session,
    /// role, count, to_seq, from, to, op, targets, content, parent, a, b).
    std::map<std::string, std::string> args;
    std::vector<std::string> list;
};

struct EventPattern {
    std::string kind;
    /// Exact matches, or substring matches when the value starts with '~'.
    Fields match;
};

struct TreeExpectation {
    std::string owner;
    std::string path;
    std::optional<std::string> hash;
    bool initial = false;
};

struct SessionExpectation {
    std::size_t index = 0;
    std::optional<std::string> state;
    std::optional<std::string> reason;
    std::optional<std::size_t> turns;
    std::optional<std::size_t> depth;
};

struct Expectations {
    std::vector<SessionExpectation> sessions;
    std::optional<std::size_t> session_count;
    std::map<std::string, std::size_t> escalations;
    std::optional<std::size_t> manager_deliveries;
    std::map<std::string, std::size_t> routes;
    std::map<std::string, std::size_t> policy_invocations;
    std::vector<std::string> forbid_cross_boundary;
    std::vector<std::vector<EventPattern>> order;
    std::vector<EventPattern> present;
    std::vector<EventPattern> absent;
    std::vector<TreeExpectation> trees;
    bool reconcile = true;
    bool chains_verify = true;
};

struct Settings {
    std::size_t d_max = 3;
    std::size_t max_turns = 20;
    std::int64_t approval_deadline = 3600;  // ticks
    std::int64_t tick_limit = 1000;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    Settings settings;
    std::vector<UserSpec> users;
    std::vector<IdentitySpec> identities;
    std::vector<ContactSpec> contacts;
    std::vector<NodeSpec> nodes;
    std::map<std::string, runtime::Script> scripts;
    std::vector<OwnerAction> actions;
    Expectations expect;
};

/// Error(ScenarioParseError) on unreadable files, YAML errors or unknown
/// keys and references.
Scenario load_scenario(const std::filesystem::path& file);
Scenario parse_scenario(const std::string& yaml_text);

}  // namespace clawnet::harness

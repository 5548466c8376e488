#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/clock.hpp"
#include "clawnet/common/ids.hpp"
#include "clawnet/governance/operation.hpp"
#include "clawnet/runtime/memory.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clawnet::runtime {

/// One utterance in a collaboration session.
struct Turn {
    IdentityId speaker;
    std::string content;
    /// Optional structured intent fields (`item`, `quantity`, ...).
    Fields intent;
    /// Terminal for the speaker's side.
    bool end_marker = false;
    Millis timestamp = 0;
};

/// Re-injected before every turn.
struct RolePrompt {
    SessionId session;
    IdentityId identity;
    std::size_t turn_count = 0;
    std::string text;
};

struct PromptInputs {
    SessionId session;
    IdentityId identity;
    std::string context_tag;
    IdentityId counterpart;
    std::string counterpart_tag;
    bool initiator = false;
    std::size_t turn_count = 0;
    std::size_t max_turns = 0;
    std::string intent;
    /// Value-layer entries of the speaker; rendered as hard constraints.
    std::vector<MemoryEntry> constraints;
};

/// Deterministic in its inputs.
RolePrompt render_role_prompt(const PromptInputs& in);

struct DirectiveRequest {
    governance::OpKind kind = governance::OpKind::read;
    std::vector<std::string> targets;
    std::string content;
};

struct MemoryWrite {
    MemoryLayer layer = MemoryLayer::factual;
    std::string key;
    std::string value;
};

/// Open a child session further down the chain.
struct SpawnRequest {
    UserId responder;
    std::string intent;
    /// Initiating identity for the child; defaults to the speaker.
    std::optional<IdentityId> as;
};

/// What a policy decides for one turn. The orchestrator carries out the
/// side effects in order (remember, consult, approval hold, directives,
/// spawn) before the content is finalized and delivered.
///
/// `content` may reference results with placeholders that are filled in
/// after the side effects: `{{recall:KEY}}`, `{{advice}}`,
/// `{{child_results}}`, `{{last}}`, `{{intent}}`, `{{result:N}}`,
/// `{{approval}}`.
struct PolicyTurn {
    std::string content;
    Fields intent;
    bool end_marker = false;
    std::vector<MemoryWrite> remember;
    std::optional<std::string> consult;
    std::optional<std::string> require_approval;
    std::vector<DirectiveRequest> directives;
    std::vector<SpawnRequest> spawn;
};

/// What a policy may see: its prompt, its own memory and the transcript.
struct TurnContext {
    RolePrompt prompt;
    SessionId session;
    IdentityId self;
    IdentityId counterpart;
    bool initiator = false;
    std::string intent;
    std::size_t turn_count = 0;
    /// How many turns this identity has already spoken in this session.
    std::size_t own_turns = 0;
    std::vector<Turn> transcript;
    std::vector<MemoryEntry> memory;
};

}  // namespace clawnet::runtime

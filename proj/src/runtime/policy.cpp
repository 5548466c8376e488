#include "clawnet/runtime/policy.hpp"

#include "clawnet/common/error.hpp"

namespace clawnet::runtime {

RolePrompt render_role_prompt(const PromptInputs& in) {
    std::string t;
    t += "You are " + in.identity.str() + ", acting only as \"" + in.context_tag + "\" for " +
         in.identity.owner().str() + ".\n";
    t += "Counterpart: " + in.counterpart.str() + " (\"" + in.counterpart_tag + "\") of " +
         in.counterpart.owner().str() + ".\n";
    t += std::string("Role: ") + (in.initiator ? "initiator" : "responder") + ". Session " + in.session.str() +
         ", turn " + std::to_string(in.turn_count + 1) + " of at most " + std::to_string(in.max_turns) + ".\n";
    t += "Intent: " + in.intent + "\n";
    t += "Norms: stay within your authorization scope; never disclose memory outside this identity; "
         "escalate decisions that need your owner's judgment; mark the end of your side when done.\n";
    if (!in.constraints.empty()) {
        t += "Hard constraints:\n";
        for (const auto& c : in.constraints) t += "- " + c.key + ": " + c.value + "\n";
    }
    return RolePrompt{in.session, in.identity, in.turn_count, std::move(t)};
}

PolicyTurn ScriptedPolicy::next(const TurnContext& ctx) {
    const auto* steps = &script_.steps;
    if (ctx.initiator && script_.as_initiator) steps = &*script_.as_initiator;
    if (!ctx.initiator && script_.as_responder) steps = &*script_.as_responder;
    if (ctx.own_turns >= steps->size())
        fail(Errc::PolicyFailure, "script for " + ctx.self.str() + " exhausted after " +
                                      std::to_string(steps->size()) + " turns");
    return (*steps)[ctx.own_turns];
}

PolicyTurn EchoPolicy::next(const TurnContext& ctx) {
    PolicyTurn t;
    t.content = ctx.intent;
    for (auto it = ctx.transcript.rbegin(); it != ctx.transcript.rend(); ++it) {
        if (it->speaker != ctx.self) {
            t.content = it->content;
            break;
        }
    }
    t.end_marker = turns_ != 0 && ctx.own_turns + 1 >= turns_;
    return t;
}

PolicyTurn LlmAdapterPolicy::next(const TurnContext& ctx) {
    if (!completion_) fail(Errc::PolicyFailure, "llm-adapter policy has no completion backend configured");
    PolicyTurn t;
    try {
        t.content = completion_(ctx.prompt.text, ctx.transcript);
    } catch (const std::exception& e) {
        fail(Errc::PolicyFailure, std::string("llm-adapter: ") + e.what());
    }
    return t;
}

}  // namespace clawnet::runtime

#pragma once

#include "clawnet/runtime/turn.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace clawnet::runtime {

/// Pluggable reasoning policy. Must not keep per-session state: everything
/// it needs is in the context.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    /// Error(PolicyFailure) when it cannot produce a turn.
    virtual PolicyTurn next(const TurnContext& ctx) = 0;
};

struct Script {
    /// Used in either role unless a role-specific script is given.
    std::vector<PolicyTurn> steps;
    std::optional<std::vector<PolicyTurn>> as_initiator;
    std::optional<std::vector<PolicyTurn>> as_responder;
};

/// Plays back a fixed script indexed by the identity's own turn count.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(Script script) : script_(std::move(script)) {}
    std::string name() const override { return "scripted"; }
    PolicyTurn next(const TurnContext& ctx) override;

private:
    Script script_;
};

/// Repeats the counterpart's last content (or the session intent when it
/// speaks first); ends its side after `turns` turns (0 = never).
class EchoPolicy final : public Policy {
public:
    explicit EchoPolicy(std::size_t turns = 0) : turns_(turns) {}
    std::string name() const override { return "echo"; }
    PolicyTurn next(const TurnContext& ctx) override;

private:
    std::size_t turns_;
};

/// Placeholder for a model-backed policy. Without a completion function
/// every turn fails with PolicyFailure.
class LlmAdapterPolicy final : public Policy {
public:
    using Completion = std::function<std::string(const std::string& system_prompt, const std::vector<Turn>& transcript)>;

    explicit LlmAdapterPolicy(Completion completion = {}) : completion_(std::move(completion)) {}
    std::string name() const override { return "llm-adapter"; }
    PolicyTurn next(const TurnContext& ctx) override;

private:
    Completion completion_;
};

}  // namespace clawnet::runtime

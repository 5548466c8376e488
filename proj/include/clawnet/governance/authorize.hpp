#pragma once

#include "clawnet/governance/decision.hpp"
#include "clawnet/governance/operation.hpp"
#include "clawnet/identity/model.hpp"

namespace clawnet::governance {

/// First-layer check: every target, lexically normalized, must fall under a
/// grant of `identity` whose class covers the operation. Pure and total;
/// every failure mode, including exceptions, yields Deny.
Decision authorize_l1(const Operation& op, const identity::IdentityAgent& identity) noexcept;

}  // namespace clawnet::governance

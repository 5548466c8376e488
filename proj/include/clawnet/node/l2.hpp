#pragma once

#include "clawnet/governance/decision.hpp"
#include "clawnet/governance/operation.hpp"
#include "clawnet/node/config.hpp"

namespace clawnet::node {

/// Second-layer check, independent of the server's verdict. Every target
/// must, after lexical normalization and after resolving symbolic links in
/// its existing ancestors, lie under a whitelist entry. Targets inside the
/// staging or backup roots are refused regardless of the whitelist. Any
/// resolution error denies.
governance::Decision authorize_l2(const governance::Operation& op, const NodeConfig& config) noexcept;

}  // namespace clawnet::node

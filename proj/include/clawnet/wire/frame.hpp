#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/ids.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace clawnet::wire {

enum class FrameKind {
    REGISTER_NODE,
    DIRECTIVE,
    DIRECTIVE_RESULT,
    SESSION_TURN,
    APPROVAL_EVENT,
    ESCALATION_EVENT,
    ABORT,
};

std::string_view to_string(FrameKind k) noexcept;
std::optional<FrameKind> parse_frame_kind(std::string_view text) noexcept;

inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

/// One protocol message. Serialized canonically as
/// `kind msg session issuer <body fields...>`.
struct Frame {
    FrameKind kind = FrameKind::DIRECTIVE;
    std::string msg_id;
    std::optional<SessionId> session;
    std::string issuer;
    Fields body;

    std::string get(std::string_view key, std::string fallback = {}) const;
    Frame& set(std::string key, std::string value) {
        body.emplace_back(std::move(key), std::move(value));
        return *this;
    }

    std::string serialize() const;
    /// Error(ProtocolError) on malformed payloads.
    static Frame parse(std::string_view payload);
};

/// 4-byte big-endian payload length followed by the payload.
std::string encode_frame(const Frame& frame);

/// Incremental decoder for a byte stream of length-prefixed frames.
class FrameDecoder {
public:
    void feed(std::string_view bytes) { buffer_.append(bytes); }
    /// Next complete frame, if any. Error(ProtocolError) on oversize or
    /// malformed frames.
    std::optional<Frame> next();

private:
    std::string buffer_;
};

}  // namespace clawnet::wire

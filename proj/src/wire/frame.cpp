#include "clawnet/wire/frame.hpp"

#include "clawnet/common/error.hpp"

namespace clawnet::wire {

std::string_view to_string(FrameKind k) noexcept {
    switch (k) {
        case FrameKind::REGISTER_NODE: return "REGISTER_NODE";
        case FrameKind::DIRECTIVE: return "DIRECTIVE";
        case FrameKind::DIRECTIVE_RESULT: return "DIRECTIVE_RESULT";
        case FrameKind::SESSION_TURN: return "SESSION_TURN";
        case FrameKind::APPROVAL_EVENT: return "APPROVAL_EVENT";
        case FrameKind::ESCALATION_EVENT: return "ESCALATION_EVENT";
        case FrameKind::ABORT: return "ABORT";
    }
    return "?";
}

std::optional<FrameKind> parse_frame_kind(std::string_view text) noexcept {
    for (auto k : {FrameKind::REGISTER_NODE, FrameKind::DIRECTIVE, FrameKind::DIRECTIVE_RESULT,
                   FrameKind::SESSION_TURN, FrameKind::APPROVAL_EVENT, FrameKind::ESCALATION_EVENT,
                   FrameKind::ABORT})
        if (to_string(k) == text) return k;
    return std::nullopt;
}

std::string Frame::get(std::string_view key, std::string fallback) const {
    auto v = field(body, key);
    return v ? *v : fallback;
}

std::string Frame::serialize() const {
    CanonicalWriter w;
    w.add("kind", to_string(kind));
    w.add("msg", msg_id);
    w.add("session", session ? session->str() : std::string());
    w.add("issuer", issuer);
    w.add_all(body);
    return w.take();
}

Frame Frame::parse(std::string_view payload) {
    auto fields = parse_canonical(payload);
    if (!fields || fields->size() < 4 || (*fields)[0].first != "kind" || (*fields)[1].first != "msg" ||
        (*fields)[2].first != "session" || (*fields)[3].first != "issuer")
        fail(Errc::ProtocolError, "malformed frame header");
    auto kind = parse_frame_kind((*fields)[0].second);
    if (!kind) fail(Errc::ProtocolError, "unknown frame kind '" + (*fields)[0].second + "'");
    Frame f;
    f.kind = *kind;
    f.msg_id = (*fields)[1].second;
    if (!(*fields)[2].second.empty()) f.session = SessionId((*fields)[2].second);
    f.issuer = (*fields)[3].second;
    f.body.assign(fields->begin() + 4, fields->end());
    return f;
}

std::string encode_frame(const Frame& frame) {
    std::string payload = frame.serialize();
    if (payload.size() > kMaxFrameBytes) fail(Errc::ProtocolError, "frame too large");
    auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out += payload;
    return out;
}

std::optional<Frame> FrameDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
    std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (n > kMaxFrameBytes) fail(Errc::ProtocolError, "frame length exceeds limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    Frame f = Frame::parse(std::string_view(buffer_).substr(4, n));
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    return f;
}

}  // namespace clawnet::wire

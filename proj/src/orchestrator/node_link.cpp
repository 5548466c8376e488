#include "clawnet/orchestrator/node_link.hpp"

#include "clawnet/common/error.hpp"

namespace clawnet::orchestrator {

wire::Frame InMemoryNodeConnection::exchange(const wire::Frame& frame, std::chrono::milliseconds) {
    if (dropped_) fail(Errc::NodeUnavailable, "node channel dropped");
    wire::FrameDecoder in;
    in.feed(wire::encode_frame(frame));
    auto delivered = in.next();
    if (!delivered) fail(Errc::ProtocolError, "frame did not survive encoding");
    ++frames_;
    auto reply = endpoint_.handle_frame(*delivered);
    wire::FrameDecoder out;
    out.feed(wire::encode_frame(reply));
    auto back = out.next();
    if (!back) fail(Errc::ProtocolError, "reply did not survive encoding");
    return *back;
}

}  // namespace clawnet::orchestrator

#pragma once

#include "clawnet/common/canonical.hpp"

#include <mutex>
#include <string>
#include <vector>

namespace clawnet {

/// One observable step of a run: a frame, an audit append, an escalation,
/// a state transition. `lane` groups events that must stay ordered relative
/// to each other (the session id, or "-" for global events).
struct TraceEvent {
    std::string kind;
    std::string lane = "-";
    Fields fields;
};

/// Receives events as they happen. Implementations must not call back into
/// the component that emitted the event.
class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void emit(TraceEvent event) = 0;
};

class NullSink final : public EventSink {
public:
    void emit(TraceEvent) override {}
};

/// Collects events in arrival order; safe to share across threads.
class RecordingSink final : public EventSink {
public:
    void emit(TraceEvent event) override {
        std::lock_guard lock(mu_);
        events_.push_back(std::move(event));
    }

    std::vector<TraceEvent> events() const {
        std::lock_guard lock(mu_);
        return events_;
    }

private:
    mutable std::mutex mu_;
    std::vector<TraceEvent> events_;
};

}  // namespace clawnet

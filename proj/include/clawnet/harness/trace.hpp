#pragma once

#include "clawnet/common/trace_sink.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace clawnet::harness {

/// Totally ordered run record; line `i` of the serialized form is
/// `n=<i> kind=<kind> lane=<lane> <fields...>` in canonical encoding.
/// Fields named `*mtime` or `wall*` carry wall-clock values and are
/// rendered as `*` so that runs are byte-reproducible.
class EventTrace {
public:
    EventTrace() = default;
    explicit EventTrace(std::vector<TraceEvent> events) : events_(std::move(events)) {}

    const std::vector<TraceEvent>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }

    std::string serialize() const;
    /// Error(ProtocolError) on lines that are not canonical or lack
    /// n/kind/lane.
    static EventTrace parse(std::string_view text);

    /// Events of `kind` whose fields include every (key, value) in `match`.
    std::vector<std::size_t> find(std::string_view kind, const Fields& match = {}) const;

private:
    std::vector<TraceEvent> events_;
};

bool is_wall_clock_field(std::string_view key);

enum class DiffMode {
    /// Order-sensitive over the whole trace.
    strict,
    /// Events in different lanes are independent: only per-lane order
    /// counts, and fields derived from global counters (n, seq, prev,
    /// hash, msg ids, node sequence numbers) are ignored.
    permutation_tolerant,
};

struct Difference {
    enum class Kind { insertion, deletion } kind = Kind::insertion;
    std::string lane;
    /// Index in the trace (insertion) or the golden (deletion).
    std::size_t index = 0;
    std::string line;
};

/// Minimal edit script (LCS) from `golden` to `trace`; an insertion is an
/// event present only in `trace`.
std::vector<Difference> diff_trace(const EventTrace& trace, const EventTrace& golden,
                                   DiffMode mode = DiffMode::strict);

std::string describe(const Difference& d);

}  // namespace clawnet::harness

#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace clawnet {

/// Milliseconds since the Unix epoch, UTC.
using Millis = std::int64_t;

class Clock {
public:
    virtual ~Clock() = default;
    virtual Millis now_ms() const = 0;
};

class SystemClock final : public Clock {
public:
    Millis now_ms() const override;
};

/// Integer-tick clock for deterministic runs. Tick 0 maps to `epoch_ms`.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(Millis epoch_ms = 1772323200000 /* 2026-03-01T00:00:00Z */,
                          Millis ms_per_tick = 1000)
        : epoch_ms_(epoch_ms), ms_per_tick_(ms_per_tick) {}

    Millis now_ms() const override { return epoch_ms_ + tick_.load() * ms_per_tick_; }

    std::int64_t tick() const { return tick_.load(); }
    void set_tick(std::int64_t t) { tick_.store(t); }
    void advance(std::int64_t n = 1) { tick_.fetch_add(n); }

    Millis ms_per_tick() const { return ms_per_tick_; }

private:
    Millis epoch_ms_;
    Millis ms_per_tick_;
    std::atomic<std::int64_t> tick_{0};
};

/// `YYYY-MM-DDTHH:MM:SS.mmmZ`
std::string format_utc(Millis ms);

/// `YYYY-MM-DD`
std::string format_utc_date(Millis ms);

/// Inverse of format_utc; throws Error(InvalidArgument) on malformed input.
Millis parse_utc(const std::string& text);

}  // namespace clawnet

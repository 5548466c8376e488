#include "clawnet/common/clock.hpp"

#include "clawnet/common/error.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace clawnet {

Millis SystemClock::now_ms() const {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

std::tm to_tm(Millis ms) {
    std::time_t secs = static_cast<std::time_t>(ms >= 0 ? ms / 1000 : (ms - 999) / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    return tm;
}

}  // namespace

std::string format_utc(Millis ms) {
    std::tm tm = to_tm(ms);
    int frac = static_cast<int>(((ms % 1000) + 1000) % 1000);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

std::string format_utc_date(Millis ms) {
    std::tm tm = to_tm(ms);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday);
    return buf;
}

Millis parse_utc(const std::string& text) {
    int y, mo, d, h, mi, s, frac;
    char z = 0;
    if (text.size() != 24 ||
        std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &y, &mo, &d, &h, &mi, &s, &frac,
                    &z) != 8 ||
        z != 'Z') {
        fail(Errc::InvalidArgument, "malformed UTC timestamp '" + text + "'");
    }
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    Millis ms = static_cast<Millis>(timegm(&tm)) * 1000 + frac;
    if (format_utc(ms) != text) fail(Errc::InvalidArgument, "non-canonical timestamp '" + text + "'");
    return ms;
}

}  // namespace clawnet

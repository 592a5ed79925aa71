#include "loom/clock.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace loom {

Clock::Clock(bool simulated, TimestampMs start)
    : simulated_(simulated), sim_now_(start) {}

TimestampMs Clock::now_ms() const {
    if (simulated_) {
        return sim_now_;
    }
    auto now = std::chrono::system_clock::now().time_since_epoch();
    return std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
}

void Clock::advance_to(TimestampMs t) {
    if (simulated_ && t > sim_now_) {
        sim_now_ = t;
    }
}

std::string format_timestamp(TimestampMs t) {
    std::time_t secs = static_cast<std::time_t>(t / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d +0000 UTC",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

} // namespace loom

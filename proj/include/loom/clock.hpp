#pragma once

#include <cstdint>
#include <string>

namespace loom {

// Milliseconds since the Unix epoch.
using TimestampMs = int64_t;

// Simulated-run epoch: 2020-01-01 00:00:00 UTC. Deterministic runs start here
// so rendered logs are byte-stable across machines.
inline constexpr TimestampMs kSimEpochMs = 1577836800000;

// Source of "now" for a run. Deterministic runs use a simulated clock that
// only the scheduler advances; live runs read the system clock.
class Clock {
public:
    explicit Clock(bool simulated, TimestampMs start = kSimEpochMs);

    TimestampMs now_ms() const;
    bool simulated() const { return simulated_; }

    // No-op on a wall clock; simulated clocks never move backwards.
    void advance_to(TimestampMs t);

private:
    bool simulated_;
    TimestampMs sim_now_;
};

// "2020-01-01 00:00:00 +0000 UTC" — the timestamp column of rendered logs.
std::string format_timestamp(TimestampMs t);

} // namespace loom

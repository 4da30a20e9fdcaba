#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "securetime/clock.hpp"
#include "securetime/trace.hpp"

namespace securetime {

// Delay-attack bound set derived from the network envelope:
//   eps_m: largest sender-receiver offset that can pass a delay measurement
//          unnoticed, 2 * (max_delay - min_delay)
//   eps_1: largest offset a delay attack can reach without ever raising an
//          alarm, 3 * (max_delay - min_delay)
//   eps_2: largest offset at the moment an alarm fires,
//          4 * (max_delay - min_delay) + 2 * max_delay * max_drift
struct BoundsSet {
    std::int64_t eps_m_ns = 0;
    std::int64_t eps_1_ns = 0;
    std::int64_t eps_2_ns = 0;
    auto operator<=>(const BoundsSet&) const = default;
};

BoundsSet compute_bounds(const NetParams& net);

struct RunReport {
    std::int64_t max_unnoticed_offset_ns = 0;   // max |offset| before the first alarm
    std::optional<std::int64_t> offset_at_first_alarm_ns;
    std::optional<TrueTime> first_alarm_at;
    std::uint64_t forged_accepted = 0;   // accepted messages no honest node emitted
    std::uint64_t replays_accepted = 0;  // honest messages accepted twice by one node
    std::uint64_t corrections_applied = 0;
    std::uint64_t corrections_clamped = 0;
    std::uint64_t alarms = 0;
    std::int64_t per_message_overhead_bytes = 0;
    std::string to_text() const;  // flat key=value block
    std::string to_csv_row(const std::string& name) const;
    static std::string csv_header();
};

// Pure: the same trace always yields the same report.
RunReport evaluate(const Trace& trace);

struct CheckResult {
    bool pass = false;
    std::vector<std::string> lines;  // one verdict line per criterion
};

// Default tolerance: two scheduler ticks (ns) of discretization headroom.
inline constexpr std::int64_t kDefaultToleranceTicks = 2;

CheckResult check(const RunReport& report, const BoundsSet& bounds,
                  std::int64_t tolerance_ticks = kDefaultToleranceTicks);

// "15ms", "20.001ms", "300ns" — exact, trailing zeros trimmed.
std::string format_ns(std::int64_t ns);

}  // namespace securetime

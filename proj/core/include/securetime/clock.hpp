#pragma once

#include <cstdint>
#include <stdexcept>

namespace securetime {

using TrueTime = std::uint64_t;   // simulator reference time, nanoseconds
using LocalTime = std::uint64_t;  // a node clock's reading, nanoseconds

inline constexpr std::int64_t kPpbScale = 1'000'000'000;  // drift unit: parts per billion

// round-half-away-from-zero of value * ppb / 1e9, in wide integers.
// All drift/limit products go through this so runs are bit-reproducible.
std::int64_t scale_ppb(std::int64_t value_ns, std::int64_t ppb);

// Network and clock envelope all attack bounds derive from.
struct NetParams {
    std::int64_t min_delay_ns = 0;    // minimum one-way network delay
    std::int64_t max_delay_ns = 0;    // maximum one-way network delay
    std::int64_t max_drift_ppb = 0;   // receiver clock drift bound, relative to sender

    bool operator==(const NetParams&) const = default;

    // max_drift_ppb = 0 is rejected: the delay-measurement interval would be
    // undefined (division by the drift bound).
    void validate() const {
        if (min_delay_ns < 0 || max_delay_ns < min_delay_ns)
            throw std::invalid_argument("NetParams: need 0 <= min_delay <= max_delay");
        if (max_drift_ppb <= 0 || max_drift_ppb >= kPpbScale)
            throw std::invalid_argument("NetParams: need 0 < max_drift < 1");
    }
};

// Affine simulated clock: reading(t) = offset + round((1 + drift) * t).
// The sender's clock is the time reference by convention (drift 0, offset 0);
// all relative drift is folded into receivers.
struct SimClock {
    std::int64_t offset_ns = 0;
    std::int64_t drift_ppb = 0;

    auto operator<=>(const SimClock&) const = default;
};

LocalTime clock_read(const SimClock& clock, TrueTime true_time);

// Smallest true time whose reading is >= local. Used by the simulator to
// schedule receiver-local deadlines exactly.
TrueTime true_time_for_local(const SimClock& clock, LocalTime local);

// Clips a raw offset measurement to +-((t_arr - t_last) * max_drift).
// t_arr and t_last are both readings of the same receiver clock.
std::int64_t clamp_correction(std::int64_t raw_offset_ns, LocalTime t_arr, LocalTime t_last,
                              std::int64_t max_drift_ppb);

inline void apply_correction(SimClock& clock, std::int64_t delta_ns) { clock.offset_ns += delta_ns; }

// Offset of a clock from reference time at a given instant.
inline std::int64_t true_offset(const SimClock& clock, TrueTime now) {
    return static_cast<std::int64_t>(clock_read(clock, now)) - static_cast<std::int64_t>(now);
}

// Delay-measurement cadence: eps_m / max_drift, floored, at least 1 ns.
std::int64_t measurement_interval_ns(const NetParams& net);

}  // namespace securetime

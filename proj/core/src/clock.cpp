#include "securetime/clock.hpp"

namespace securetime {

std::int64_t scale_ppb(std::int64_t value_ns, std::int64_t ppb) {
    __int128 product = static_cast<__int128>(value_ns) * ppb;
    bool negative = product < 0;
    __int128 magnitude = negative ? -product : product;
    __int128 scaled = (magnitude + kPpbScale / 2) / kPpbScale;
    return static_cast<std::int64_t>(negative ? -scaled : scaled);
}

LocalTime clock_read(const SimClock& clock, TrueTime true_time) {
    std::int64_t reading = static_cast<std::int64_t>(true_time) + clock.offset_ns +
                           scale_ppb(static_cast<std::int64_t>(true_time), clock.drift_ppb);
    return reading < 0 ? 0 : static_cast<LocalTime>(reading);
}

TrueTime true_time_for_local(const SimClock& clock, LocalTime local) {
    // First-order inverse, then fix up; drift magnitudes are tiny so the
    // estimate is off by at most a few ns.
    std::int64_t estimate = static_cast<std::int64_t>(local) - clock.offset_ns;
    estimate -= scale_ppb(estimate, clock.drift_ppb);
    if (estimate < 0) estimate = 0;
    TrueTime t = static_cast<TrueTime>(estimate);
    while (clock_read(clock, t) < local) ++t;
    while (t > 0 && clock_read(clock, t - 1) >= local) --t;
    return t;
}

std::int64_t clamp_correction(std::int64_t raw_offset_ns, LocalTime t_arr, LocalTime t_last,
                              std::int64_t max_drift_ppb) {
    if (t_arr < t_last) throw std::invalid_argument("clamp_correction: arrival precedes t_last");
    std::int64_t limit = scale_ppb(static_cast<std::int64_t>(t_arr - t_last), max_drift_ppb);
    if (raw_offset_ns > limit) return limit;
    if (raw_offset_ns < -limit) return -limit;
    return raw_offset_ns;
}

std::int64_t measurement_interval_ns(const NetParams& net) {
    __int128 numerator = static_cast<__int128>(2) * (net.max_delay_ns - net.min_delay_ns) * kPpbScale;
    std::int64_t interval = static_cast<std::int64_t>(numerator / net.max_drift_ppb);
    return interval < 1 ? 1 : interval;
}

}  // namespace securetime

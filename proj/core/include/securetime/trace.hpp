#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "securetime/clock.hpp"
#include "securetime/crypto.hpp"

namespace securetime {

// Append-only record stream a simulation produces: one row per emission,
// adversary decision, delivery, receiver decision, alarm, or offset sample.
struct TraceEvent {
    std::uint64_t index = 0;
    TrueTime true_time = 0;
    std::string node;
    std::string kind;
    std::string detail;
    std::optional<std::int64_t> true_offset_ns;    // acting receiver's offset
    std::optional<std::int64_t> applied_delta_ns;  // set on applied corrections
    bool alarm = false;

    // Analysis fields, not serialized to CSV: which message the event is
    // about, whether the receiver accepted it into its state, and whether
    // the accepted copy was delivered by the adversary rather than the
    // network (a pre-played copy can be byte-identical to the honest one).
    std::optional<crypto::Digest> message_digest;
    bool accepted = false;
    bool honest_emission = false;
    bool adversarial_delivery = false;
};

class Trace {
  public:
    TraceEvent& append(TraceEvent event) {
        event.index = events_.size();
        events_.push_back(std::move(event));
        return events_.back();
    }

    const std::vector<TraceEvent>& events() const { return events_; }
    bool empty() const { return events_.empty(); }
    std::size_t size() const { return events_.size(); }

    void write_csv(std::ostream& out) const;
    std::string csv_string() const;

    // SHA-256 over the CSV serialization; the determinism contract compares
    // these across runs.
    crypto::Digest hash() const;

  private:
    std::vector<TraceEvent> events_;
};

}  // namespace securetime

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "securetime/bytes.hpp"
#include "securetime/clock.hpp"
#include "securetime/crypto.hpp"
#include "securetime/rng.hpp"

namespace securetime {

struct Scenario;

// Node addressing inside a simulation: the sender plus indexed receivers.
inline constexpr std::int32_t kSenderNode = -1;

struct InFlight {
    Bytes bytes;
    std::int32_t from = kSenderNode;
    std::int32_t to = 0;
    TrueTime injected_at = 0;
    std::int64_t link_delay_ns = 0;  // honestly sampled delay for this hop
};

struct ActDeliver {
    std::int64_t delay_ns = 0;
};
struct ActDrop {};
struct ActStore {
    std::uint64_t tag = 0;
};
struct ActReplay {
    std::uint64_t tag = 0;
    std::int64_t delay_ns = 0;
};
struct ActInject {
    Bytes bytes;
    std::int32_t to = 0;
    std::int64_t delay_ns = 0;
};
struct ActModify {
    Bytes bytes;
    std::int64_t delay_ns = 0;
};

using AdversaryAction = std::variant<ActDeliver, ActDrop, ActStore, ActReplay, ActInject, ActModify>;

// Ground-truth view of one receiver, read straight out of the simulation.
// Strategies built on it are omniscient, strictly stronger than anything
// realizable, which keeps the bound checks conservative.
struct ReceiverProbe {
    std::int64_t true_offset_ns = 0;
    LocalTime local_now = 0;
    LocalTime t_last = 0;
    std::int64_t path_delay_ns = 0;
    LocalTime last_measurement_at = 0;
    LocalTime next_measurement_due = 0;
    std::int64_t measurement_interval_ns = 0;
    bool pending_measurement = false;
    LocalTime pending_deadline = 0;
    std::uint32_t next_acceptable_seq = 0;
    std::size_t buffered_syncs = 0;
    SimClock clock;
};

class SimProbe {
  public:
    virtual ~SimProbe() = default;
    virtual TrueTime now() const = 0;
    virtual ReceiverProbe receiver_probe(std::size_t index) const = 0;
    virtual std::size_t receiver_count() const = 0;
};

struct AdversaryContext {
    const NetParams& net;
    const SimProbe& sim;
    Rng& rng;
    std::uint64_t nonce_space = 0;
    // Keys of compromised receivers, per the scenario. No other private key
    // ever reaches a strategy.
    const std::vector<crypto::KeyPair>* granted_keys = nullptr;
};

// Mediates every in-flight message exactly once before delivery scheduling.
class AdversaryStrategy {
  public:
    virtual ~AdversaryStrategy() = default;
    virtual std::string_view name() const = 0;
    virtual std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext& ctx) = 0;
};

std::unique_ptr<AdversaryStrategy> make_strategy(const Scenario& scenario);

}  // namespace securetime

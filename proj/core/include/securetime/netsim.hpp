#pragma once

#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "securetime/adversary.hpp"
#include "securetime/receiver.hpp"
#include "securetime/scenario.hpp"
#include "securetime/sender.hpp"
#include "securetime/trace.hpp"

namespace securetime {

// Simulations begin at a nonzero epoch so receiver clocks that start behind
// the sender still read positive local times.
inline constexpr TrueTime kSimStartNs = 10'000'000'000;

// Deterministic discrete-event network: one sender, N receivers, optional
// transparent clocks on the multicast path, and a mandatory adversary
// interposition point. Events are processed in (due time, insertion order),
// so identical (scenario, seed) pairs replay byte-identically.
class Simulation : public SimProbe {
  public:
    explicit Simulation(Scenario scenario);
    Simulation(Scenario scenario, std::uint64_t seed_override);

    const Trace& run();

    const Trace& trace() const { return trace_; }
    const Sender& sender() const { return *sender_; }
    const Receiver& receiver(std::size_t index) const { return receivers_.at(index); }

    TrueTime now() const override { return now_; }
    ReceiverProbe receiver_probe(std::size_t index) const override;
    std::size_t receiver_count() const override { return receivers_.size(); }

  private:
    struct TcNode {
        std::uint64_t tc_id = 0;
        crypto::KeyPair keys;
        TcSpec spec;
        std::map<std::uint32_t, std::uint64_t> residence_by_seq;  // sync seq -> imposed delay
    };

    struct EmitSlot {};                       // next multicast emission
    struct EmitFollowUp {};                   // 2-step second message
    struct Deliver {
        Bytes bytes;
        std::int32_t from = kSenderNode;
        std::int32_t to = 0;
        bool injected = false;  // scheduled by an adversary inject action
    };
    struct NodeTick {
        std::size_t receiver = 0;
    };
    using EventAction = std::variant<EmitSlot, EmitFollowUp, Deliver, NodeTick>;

    struct Event {
        TrueTime due = 0;
        std::uint64_t order = 0;
        EventAction action;
    };
    struct EventLater {
        bool operator()(const Event& a, const Event& b) const {
            return a.due != b.due ? a.due > b.due : a.order > b.order;
        }
    };

    void schedule(TrueTime due, EventAction action);
    void schedule_receiver_tick(std::size_t index);
    void run_emit_slot();
    void emit_multicast(const Bytes& bytes, wire::MsgKind kind, std::uint32_t seq, std::uint64_t extra_delay);
    void send_unicast(Bytes bytes, std::int32_t from, std::int32_t to);
    void mediate(InFlight in_flight);
    void deliver(const Deliver& delivery);
    void deliver_to_sender(const Deliver& delivery);
    void deliver_to_receiver(const Deliver& delivery);
    void handle_tick(std::size_t index);
    std::int64_t sample_link_delay(std::size_t receiver_index);
    TraceEvent& record(TraceEvent event);
    void record_alarms(std::size_t index, std::size_t previously, TrueTime at);
    std::string receiver_name(std::size_t index) const;

    Scenario scenario_;
    std::unique_ptr<Sender> sender_;
    std::vector<Receiver> receivers_;
    std::vector<TcNode> tcs_;
    std::unique_ptr<AdversaryStrategy> strategy_;
    std::vector<crypto::KeyPair> granted_keys_;

    Rng session_rng_;
    Rng nonce_rng_;
    Rng adversary_rng_;
    std::vector<Rng> link_rngs_;
    Rng tc_rng_;

    std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
    std::uint64_t next_order_ = 0;
    TrueTime now_ = 0;
    std::uint32_t syncs_emitted_ = 0;
    TrueTime pending_sync_send_time_ = 0;
    std::map<std::uint64_t, InFlight> adversary_store_;
    // digest+arrival of adversary-injected syncs sitting in each buffer
    std::map<std::size_t, std::set<std::pair<crypto::Digest, LocalTime>>> injected_buffered_;
    std::set<std::pair<std::size_t, TrueTime>> scheduled_ticks_;
    bool alarm_seen_ = false;
    bool ran_ = false;
    Trace trace_;
};

}  // namespace securetime

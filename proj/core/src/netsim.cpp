#include "securetime/netsim.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

namespace securetime {

namespace {

constexpr std::uint64_t kMaxEvents = 80'000'000;

std::optional<wire::MsgKind> peek_kind(BytesView bytes) {
    if (bytes.size() < wire::kHeaderLen || bytes[0] != wire::kMagic0 || bytes[1] != wire::kMagic1)
        return std::nullopt;
    if (bytes[3] < 1 || bytes[3] > 7) return std::nullopt;
    return static_cast<wire::MsgKind>(bytes[3]);
}

std::string describe(BytesView bytes) {
    auto kind = peek_kind(bytes);
    if (!kind) return "raw";
    std::ostringstream out;
    out << wire::kind_name(*kind) << " seq=" << get_u32(bytes, 12);
    return out.str();
}

}  // namespace

Simulation::Simulation(Scenario scenario) : Simulation(std::move(scenario), 0) {}

Simulation::Simulation(Scenario scenario, std::uint64_t seed_override)
    : scenario_(std::move(scenario)),
      session_rng_(0),
      nonce_rng_(0),
      adversary_rng_(0),
      tc_rng_(0) {
    if (seed_override != 0) scenario_.seed = seed_override;
    scenario_.validate();
    const std::uint64_t seed = scenario_.seed;
    session_rng_ = Rng::derive(seed, "session-keys");
    nonce_rng_ = Rng::derive(seed, "nonces");
    adversary_rng_ = Rng::derive(seed, "adversary");
    tc_rng_ = Rng::derive(seed, "tc-residence");

    SenderConfig sender_config;
    sender_config.scheme = scenario_.scheme;
    sender_config.net = scenario_.net;
    sender_config.mode = scenario_.mode;
    sender_config.rotation_threshold = scenario_.rotation_threshold;
    sender_config.nonce_space = scenario_.nonce_space;
    Rng long_term_rng = Rng::derive(seed, "long-term-key");
    sender_ = std::make_unique<Sender>(sender_config,
                                       crypto::generate_keypair(*scenario_.scheme, long_term_rng.next_seed32()));

    std::set<crypto::KeyId> key_ids{crypto::key_id_for(sender_->long_term_public())};
    auto claim_key_id = [&](const crypto::PublicKey& pk) {
        if (!key_ids.insert(crypto::key_id_for(pk)).second)
            throw ScenarioError("key id collision across the run's keys");
    };

    for (std::size_t i = 0; i < scenario_.tcs.size(); ++i) {
        TcNode tc;
        tc.tc_id = 0x7c00 + i;
        Rng rng = Rng::derive(seed, "tc-key-" + std::to_string(i));
        tc.keys = crypto::generate_keypair(*scenario_.scheme, rng.next_seed32());
        tc.spec = scenario_.tcs[i];
        claim_key_id(tc.keys.pub);
        tcs_.push_back(std::move(tc));
    }

    receivers_.reserve(scenario_.receivers.size());
    for (std::size_t i = 0; i < scenario_.receivers.size(); ++i) {
        const ReceiverSpec& spec = scenario_.receivers[i];
        ReceiverConfig config;
        config.scheme = scenario_.scheme;
        config.net = scenario_.net;
        config.receiver_id = i;
        config.sync_buffer_capacity = scenario_.sync_buffer_capacity;
        config.bootstrap_enabled = scenario_.bootstrap_enabled;
        if (scenario_.receivers_trust_tcs)
            for (const auto& tc : tcs_) config.trusted_tcs.emplace(tc.tc_id, tc.keys.pub);

        Rng rng = Rng::derive(seed, "receiver-key-" + std::to_string(i));
        crypto::KeyPair keys = crypto::generate_keypair(*scenario_.scheme, rng.next_seed32());
        claim_key_id(keys.pub);
        sender_->register_receiver(i, keys.pub);
        if (spec.compromised) granted_keys_.push_back(keys);

        receivers_.emplace_back(config, sender_->long_term_public(), std::move(keys),
                                SimClock{spec.initial_offset_ns, spec.drift_ppb});
        link_rngs_.push_back(Rng::derive(seed, "link-" + std::to_string(i)));
    }

    strategy_ = make_strategy(scenario_);
}

ReceiverProbe Simulation::receiver_probe(std::size_t index) const {
    const Receiver& rx = receivers_.at(index);
    ReceiverProbe probe;
    probe.clock = rx.clock();
    probe.true_offset_ns = true_offset(rx.clock(), now_);
    probe.local_now = clock_read(rx.clock(), now_);
    probe.t_last = rx.t_last();
    probe.path_delay_ns = rx.path_delay_ns();
    probe.last_measurement_at = rx.last_measurement_at();
    probe.next_measurement_due = rx.next_measurement_due();
    probe.measurement_interval_ns = rx.measurement_interval();
    probe.pending_measurement = rx.has_pending_measurement();
    probe.pending_deadline = rx.pending_deadline().value_or(0);
    probe.next_acceptable_seq = rx.next_acceptable_seq();
    probe.buffered_syncs = rx.sync_buffer().size();
    return probe;
}

void Simulation::schedule(TrueTime due, EventAction action) {
    queue_.push(Event{due, next_order_++, std::move(action)});
}

std::string Simulation::receiver_name(std::size_t index) const { return "rx" + std::to_string(index); }

TraceEvent& Simulation::record(TraceEvent event) {
    event.true_time = now_;
    return trace_.append(std::move(event));
}

std::int64_t Simulation::sample_link_delay(std::size_t receiver_index) {
    if (scenario_.constant_delay_ns) return *scenario_.constant_delay_ns;
    const std::int64_t spread = scenario_.net.max_delay_ns - scenario_.net.min_delay_ns;
    return scenario_.net.min_delay_ns +
           static_cast<std::int64_t>(link_rngs_[receiver_index].bounded(static_cast<std::uint64_t>(spread) + 1));
}

const Trace& Simulation::run() {
    if (ran_) return trace_;
    ran_ = true;

    const TrueTime end = kSimStartNs + scenario_.horizon_ns;
    schedule(kSimStartNs, EmitSlot{});
    for (std::size_t i = 0; i < receivers_.size(); ++i) schedule_receiver_tick(i);

    std::uint64_t processed = 0;
    while (!queue_.empty()) {
        Event event = queue_.top();
        queue_.pop();
        if (event.due > end) break;
        if (++processed > kMaxEvents) throw std::runtime_error("simulation exceeded event budget");
        now_ = event.due;

        std::visit(
            [&](auto& action) {
                using T = std::decay_t<decltype(action)>;
                if constexpr (std::is_same_v<T, EmitSlot>)
                    run_emit_slot();
                else if constexpr (std::is_same_v<T, EmitFollowUp>) {
                    wire::FollowUp msg = sender_->emit_followup(pending_sync_send_time_);
                    Bytes bytes = wire::encode(msg);
                    for (auto& tc : tcs_) {
                        auto residence = tc.residence_by_seq.find(msg.header.seq - 1);
                        if (residence == tc.residence_by_seq.end()) continue;
                        bytes = wire::append_tc_block(bytes, tc.tc_id, residence->second, tc.keys);
                        tc.residence_by_seq.erase(residence);
                        TraceEvent e;
                        e.node = "tc" + std::to_string(tc.tc_id - 0x7c00);
                        e.kind = "tc-amend";
                        e.detail = describe(bytes);
                        e.message_digest = crypto::digest(bytes);
                        e.honest_emission = true;
                        record(std::move(e));
                    }
                    emit_multicast(bytes, wire::MsgKind::kFollowUp, msg.header.seq, 0);
                } else if constexpr (std::is_same_v<T, Deliver>)
                    deliver(action);
                else if constexpr (std::is_same_v<T, NodeTick>)
                    handle_tick(action.receiver);
            },
            event.action);

        if (alarm_seen_ && scenario_.stop_on_alarm) break;
    }

    for (std::size_t i = 0; i < receivers_.size(); ++i) {
        TraceEvent e;
        e.node = receiver_name(i);
        e.kind = "sample";
        e.detail = "horizon";
        e.true_offset_ns = true_offset(receivers_[i].clock(), now_);
        record(std::move(e));
    }
    return trace_;
}

void Simulation::run_emit_slot() {
    if (now_ == kSimStartNs) {
        wire::SessionAnnounce announce = sender_->start_session(session_rng_);
        emit_multicast(sender_->session().announce_bytes, wire::MsgKind::kSessionAnnounce,
                       announce.header.seq, 0);
        schedule(now_ + static_cast<TrueTime>(scenario_.sync_interval_ns), EmitSlot{});
        return;
    }

    if (auto rotated = sender_->maybe_rotate_session(session_rng_))
        emit_multicast(sender_->session().announce_bytes, wire::MsgKind::kSessionAnnounce,
                       rotated->header.seq, 0);
    else if (scenario_.announce_every_syncs != 0 && syncs_emitted_ != 0 &&
             syncs_emitted_ % scenario_.announce_every_syncs == 0)
        emit_multicast(sender_->session().announce_bytes, wire::MsgKind::kSessionAnnounce,
                       wire::seq_of(std::get<wire::Message>(wire::decode(sender_->session().announce_bytes))),
                       0);

    if (scenario_.mode == SyncMode::kOneStep) {
        wire::Sync1Step msg = sender_->emit_sync_1step(now_);
        emit_multicast(wire::encode(msg), wire::MsgKind::kSync1Step, msg.header.seq, 0);
    } else {
        wire::Sync2Step msg = sender_->emit_sync_2step(nonce_rng_);
        pending_sync_send_time_ = now_;
        std::uint64_t extra = 0;
        for (auto& tc : tcs_) {
            std::uint64_t residence = static_cast<std::uint64_t>(tc.spec.residence_ns);
            if (tc.spec.residence_jitter_ns > 0)
                residence += tc_rng_.bounded(static_cast<std::uint64_t>(tc.spec.residence_jitter_ns) + 1);
            tc.residence_by_seq[msg.header.seq] = residence;
            extra += residence;
        }
        emit_multicast(wire::encode(msg), wire::MsgKind::kSync2Step, msg.header.seq, extra);
        schedule(now_ + static_cast<TrueTime>(scenario_.followup_gap_ns), EmitFollowUp{});
    }
    syncs_emitted_ += 1;
    schedule(now_ + static_cast<TrueTime>(scenario_.sync_interval_ns), EmitSlot{});
}

void Simulation::emit_multicast(const Bytes& bytes, wire::MsgKind kind, std::uint32_t seq,
                                std::uint64_t extra_delay) {
    TraceEvent e;
    e.node = "sender";
    e.kind = "emit";
    std::ostringstream detail;
    detail << wire::kind_name(kind) << " seq=" << seq;
    if (extra_delay != 0) detail << " tc_residence=" << extra_delay;
    e.detail = detail.str();
    e.message_digest = crypto::digest(bytes);
    e.honest_emission = true;
    record(std::move(e));

    for (std::size_t i = 0; i < receivers_.size(); ++i) {
        InFlight flight;
        flight.bytes = bytes;
        flight.from = kSenderNode;
        flight.to = static_cast<std::int32_t>(i);
        flight.injected_at = now_ + extra_delay;
        flight.link_delay_ns = sample_link_delay(i);
        mediate(std::move(flight));
    }
}

void Simulation::send_unicast(Bytes bytes, std::int32_t from, std::int32_t to) {
    InFlight flight;
    flight.bytes = std::move(bytes);
    flight.from = from;
    flight.to = to;
    flight.injected_at = now_;
    flight.link_delay_ns =
        sample_link_delay(static_cast<std::size_t>(from == kSenderNode ? to : from));
    mediate(std::move(flight));
}

void Simulation::mediate(InFlight in_flight) {
    AdversaryContext ctx{scenario_.net, *this, adversary_rng_, scenario_.nonce_space, &granted_keys_};
    std::vector<AdversaryAction> actions = strategy_->on_message(in_flight, ctx);

    for (const AdversaryAction& action : actions) {
        std::visit(
            [&](const auto& act) {
                using T = std::decay_t<decltype(act)>;
                TraceEvent e;
                e.node = "adversary";
                e.kind = "adversary";
                if constexpr (std::is_same_v<T, ActDeliver>) {
                    e.detail = "deliver " + describe(in_flight.bytes) + " delay=" + std::to_string(act.delay_ns);
                    e.message_digest = crypto::digest(in_flight.bytes);
                    record(std::move(e));
                    schedule(in_flight.injected_at + static_cast<TrueTime>(act.delay_ns),
                             Deliver{in_flight.bytes, in_flight.from, in_flight.to});
                } else if constexpr (std::is_same_v<T, ActDrop>) {
                    e.detail = "drop " + describe(in_flight.bytes);
                    record(std::move(e));
                } else if constexpr (std::is_same_v<T, ActStore>) {
                    e.detail = "store " + describe(in_flight.bytes);
                    record(std::move(e));
                    adversary_store_[act.tag] = in_flight;
                } else if constexpr (std::is_same_v<T, ActReplay>) {
                    auto stored = adversary_store_.find(act.tag);
                    if (stored == adversary_store_.end()) return;
                    e.detail = "replay " + describe(stored->second.bytes);
                    e.message_digest = crypto::digest(stored->second.bytes);
                    record(std::move(e));
                    schedule(in_flight.injected_at + static_cast<TrueTime>(act.delay_ns),
                             Deliver{stored->second.bytes, stored->second.from, stored->second.to});
                } else if constexpr (std::is_same_v<T, ActInject>) {
                    e.detail = "inject " + describe(act.bytes);
                    e.message_digest = crypto::digest(act.bytes);
                    record(std::move(e));
                    schedule(in_flight.injected_at + static_cast<TrueTime>(act.delay_ns),
                             Deliver{act.bytes, in_flight.from, act.to, true});
                } else if constexpr (std::is_same_v<T, ActModify>) {
                    e.detail = "modify " + describe(act.bytes);
                    e.message_digest = crypto::digest(act.bytes);
                    record(std::move(e));
                    schedule(in_flight.injected_at + static_cast<TrueTime>(act.delay_ns),
                             Deliver{act.bytes, in_flight.from, in_flight.to});
                }
            },
            action);
    }
}

void Simulation::deliver(const Deliver& delivery) {
    if (delivery.to == kSenderNode)
        deliver_to_sender(delivery);
    else
        deliver_to_receiver(delivery);
}

void Simulation::deliver_to_sender(const Deliver& delivery) {
    auto response = sender_->handle_delay_request(delivery.bytes, now_, now_);
    TraceEvent e;
    e.node = "sender";
    e.kind = "decision";
    e.detail = std::string(response ? "answered " : "dropped ") + describe(delivery.bytes);
    record(std::move(e));
    if (!response) return;

    auto decoded = wire::decode(delivery.bytes);
    const auto& req = std::get<wire::DelayReq>(std::get<wire::Message>(decoded));
    if (req.receiver_id >= receivers_.size()) return;

    Bytes bytes = wire::encode(*response);
    TraceEvent emit;
    emit.node = "sender";
    emit.kind = "emit";
    emit.detail = describe(bytes);
    emit.message_digest = crypto::digest(bytes);
    emit.honest_emission = true;
    record(std::move(emit));
    send_unicast(std::move(bytes), kSenderNode, static_cast<std::int32_t>(req.receiver_id));
}

void Simulation::record_alarms(std::size_t index, std::size_t previously, TrueTime) {
    const Receiver& rx = receivers_[index];
    for (std::size_t i = previously; i < rx.alarms().size(); ++i) {
        const Alarm& alarm = rx.alarms()[i];
        TraceEvent e;
        e.node = receiver_name(index);
        e.kind = "alarm";
        e.detail = std::string(alarm_kind_name(alarm.kind)) + ": " + alarm.detail;
        e.true_offset_ns = true_offset(rx.clock(), now_);
        e.alarm = true;
        record(std::move(e));
        alarm_seen_ = true;
    }
}

void Simulation::deliver_to_receiver(const Deliver& delivery) {
    const std::size_t index = static_cast<std::size_t>(delivery.to);
    if (index >= receivers_.size()) return;
    Receiver& rx = receivers_[index];
    const LocalTime t_arr = clock_read(rx.clock(), now_);
    const std::size_t alarms_before = rx.alarms().size();
    auto kind = peek_kind(delivery.bytes);

    TraceEvent e;
    e.node = receiver_name(index);
    e.kind = "decision";
    e.message_digest = crypto::digest(delivery.bytes);

    std::ostringstream detail;
    if (!kind) {
        detail << "undecodable message ignored";
    } else {
        switch (*kind) {
            case wire::MsgKind::kSessionAnnounce: {
                auto decision = rx.handle_session_announce(delivery.bytes);
                e.accepted = decision.adopted;
                detail << "announce "
                       << (decision.adopted ? "adopted"
                                            : (decision.accepted ? "duplicate"
                                                                 : std::string(reject_reason_name(decision.reason))));
                break;
            }
            case wire::MsgKind::kSync1Step: {
                auto decision = rx.handle_sync_1step(delivery.bytes, t_arr);
                e.accepted = decision.accepted;
                if (decision.accepted) {
                    e.applied_delta_ns = decision.applied_delta_ns;
                    detail << "sync-1step seq=" << decision.seq << " applied raw=" << decision.raw_offset_ns
                           << (decision.clamped ? " clamped" : "");
                } else {
                    detail << "sync-1step seq=" << decision.seq << " rejected "
                           << reject_reason_name(decision.reason);
                }
                break;
            }
            case wire::MsgKind::kSync2Step: {
                auto decision = rx.handle_sync_2step(delivery.bytes, t_arr);
                if (decision.buffered && delivery.injected)
                    injected_buffered_[index].insert({*e.message_digest, t_arr});
                detail << "sync-2step seq=" << decision.seq
                       << (decision.buffered ? " buffered"
                                             : " discarded " + std::string(reject_reason_name(decision.reason)));
                break;
            }
            case wire::MsgKind::kFollowUp: {
                auto decision = rx.handle_followup(delivery.bytes, t_arr);
                e.accepted = decision.accepted;
                if (decision.accepted) {
                    e.applied_delta_ns = decision.applied_delta_ns;
                    detail << "followup seq=" << decision.seq << " applied raw=" << decision.raw_offset_ns
                           << (decision.clamped ? " clamped" : "");
                    TraceEvent validated;
                    validated.node = receiver_name(index);
                    validated.kind = "sync-validated";
                    validated.detail = "seq=" + std::to_string(decision.seq - 1);
                    validated.message_digest = crypto::digest(decision.matched_sync_bytes);
                    validated.accepted = true;
                    validated.true_offset_ns = true_offset(rx.clock(), now_);
                    auto& injected = injected_buffered_[index];
                    validated.adversarial_delivery =
                        injected.contains({*validated.message_digest, decision.sync_arrival});
                    if (validated.adversarial_delivery) validated.detail += " adversary-injected";
                    record(std::move(validated));
                } else {
                    detail << "followup seq=" << decision.seq << " rejected "
                           << reject_reason_name(decision.reason);
                    if (decision.purged_stale > 0) detail << " purged=" << decision.purged_stale;
                }
                break;
            }
            case wire::MsgKind::kDelayResp: {
                auto decision = rx.handle_delay_response(delivery.bytes, t_arr);
                e.accepted = decision.updated;
                detail << "delay-resp "
                       << (decision.updated ? "path_delay=" + std::to_string(decision.path_delay_ns)
                                            : std::string(reject_reason_name(decision.reason)));
                break;
            }
            case wire::MsgKind::kErrorResp: {
                auto decision = rx.handle_error_response(delivery.bytes, t_arr);
                e.accepted = decision.bootstrapped;
                if (decision.bootstrapped) {
                    e.applied_delta_ns = decision.applied_delta_ns;
                    detail << "error-resp bootstrap";
                } else {
                    detail << "error-resp " << reject_reason_name(decision.reason);
                }
                break;
            }
            case wire::MsgKind::kDelayReq:
                detail << "delay-req ignored";  // receivers do not answer requests
                break;
        }
    }
    e.detail = detail.str();
    e.true_offset_ns = true_offset(rx.clock(), now_);
    record(std::move(e));
    if (rx.sync_buffer().empty()) injected_buffered_[index].clear();
    record_alarms(index, alarms_before, now_);
    schedule_receiver_tick(index);
}

void Simulation::handle_tick(std::size_t index) {
    Receiver& rx = receivers_[index];
    scheduled_ticks_.erase({index, now_});
    const std::size_t alarms_before = rx.alarms().size();
    const LocalTime local_now = clock_read(rx.clock(), now_);
    TickResult result = rx.tick(local_now);
    if (result.request) {
        Bytes bytes = wire::encode(*result.request);
        TraceEvent e;
        e.node = receiver_name(index);
        e.kind = "emit";
        e.detail = "delay-req t1=" + std::to_string(result.request->t1);
        e.message_digest = crypto::digest(bytes);
        e.honest_emission = true;
        record(std::move(e));
        send_unicast(std::move(bytes), static_cast<std::int32_t>(index), kSenderNode);
    }
    record_alarms(index, alarms_before, now_);
    schedule_receiver_tick(index);
}

void Simulation::schedule_receiver_tick(std::size_t index) {
    const Receiver& rx = receivers_[index];
    const LocalTime due_local = rx.next_due_local();
    if (due_local == std::numeric_limits<LocalTime>::max()) return;  // nothing to wake for
    TrueTime due = true_time_for_local(rx.clock(), due_local);
    if (due < now_) due = now_;
    if (due < kSimStartNs) due = kSimStartNs;
    if (due > kSimStartNs + scenario_.horizon_ns) return;
    if (!scheduled_ticks_.insert({index, due}).second) return;
    schedule(due, NodeTick{index});
}

}  // namespace securetime

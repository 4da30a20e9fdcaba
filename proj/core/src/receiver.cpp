#include "securetime/receiver.hpp"

#include <algorithm>
#include <limits>

namespace securetime {

namespace {

std::int64_t diff(LocalTime a, LocalTime b) {
    return static_cast<std::int64_t>(a) - static_cast<std::int64_t>(b);
}

}  // namespace

std::string_view reject_reason_name(RejectReason reason) {
    switch (reason) {
        case RejectReason::kNone: return "none";
        case RejectReason::kMalformed: return "malformed";
        case RejectReason::kWrongSession: return "wrong-session";
        case RejectReason::kBadSignature: return "bad-signature";
        case RejectReason::kStaleSeq: return "stale-seq";
        case RejectReason::kDuplicate: return "duplicate";
        case RejectReason::kBufferFull: return "buffer-full";
        case RejectReason::kNoMatchingSync: return "no-matching-sync";
        case RejectReason::kHashMismatch: return "hash-mismatch";
        case RejectReason::kUnsolicited: return "unsolicited";
        case RejectReason::kRangeViolation: return "range-violation";
        case RejectReason::kSessionMismatch: return "session-mismatch";
        case RejectReason::kProtocolOrder: return "protocol-order";
    }
    return "unknown";
}

std::string_view alarm_kind_name(AlarmKind kind) {
    switch (kind) {
        case AlarmKind::kDelayAttackSuspected: return "delay-attack-suspected";
        case AlarmKind::kMeasurementTimeout: return "measurement-timeout";
        case AlarmKind::kSessionMismatch: return "session-mismatch";
    }
    return "unknown";
}

Receiver::Receiver(ReceiverConfig config, crypto::PublicKey sender_long_term, crypto::KeyPair own_keys,
                   SimClock initial_clock)
    : config_(std::move(config)),
      sender_long_term_(sender_long_term),
      own_keys_(std::move(own_keys)),
      clock_(initial_clock) {
    config_.net.validate();
    if (config_.scheme == nullptr) throw std::invalid_argument("Receiver: no signature scheme");
    own_key_id_ = crypto::key_id_for(own_keys_.pub);
    path_delay_ns_ = config_.net.min_delay_ns;  // initial guess until measured
    measurement_interval_ns_ = measurement_interval_ns(config_.net);
}

void Receiver::raise(LocalTime at, AlarmKind kind, std::string detail) {
    alarm_log_.push_back(Alarm{at, kind, std::move(detail)});
}

bool Receiver::session_matches(const wire::Header& header) const {
    return session_key_id_.has_value() && header.session_key_id == *session_key_id_;
}

AnnounceDecision Receiver::handle_session_announce(BytesView bytes) {
    auto decoded = wire::decode(bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) return {false, false, RejectReason::kMalformed};
    auto* msg = std::get_if<wire::SessionAnnounce>(&std::get<wire::Message>(decoded));
    if (msg == nullptr) return {false, false, RejectReason::kMalformed};
    if (crypto::key_id_for(msg->session_public_key) != msg->header.session_key_id)
        return {false, false, RejectReason::kMalformed};

    auto portion = wire::signed_portion(bytes, wire::MsgKind::kSessionAnnounce);
    if (!crypto::verify(*config_.scheme, sender_long_term_, *portion, msg->long_term_signature))
        return {false, false, RejectReason::kBadSignature};

    if (session_key_id_ && *session_key_id_ == msg->header.session_key_id)
        return {true, false, RejectReason::kNone};  // idempotent re-receive

    session_pk_ = msg->session_public_key;
    session_key_id_ = msg->header.session_key_id;
    next_acceptable_seq_ = msg->header.seq;
    sync_buffer_.clear();
    return {true, true, RejectReason::kNone};
}

SyncDecision Receiver::handle_sync_1step(BytesView bytes, LocalTime t_arr) {
    SyncDecision d;
    auto decoded = wire::decode(bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    auto* msg = std::get_if<wire::Sync1Step>(&std::get<wire::Message>(decoded));
    if (msg == nullptr) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    d.seq = msg->header.seq;
    if (!session_matches(msg->header)) {
        d.reason = RejectReason::kWrongSession;
        return d;
    }
    auto portion = wire::signed_portion(bytes, wire::MsgKind::kSync1Step);
    if (!crypto::verify(*config_.scheme, *session_pk_, *portion, msg->signature)) {
        d.reason = RejectReason::kBadSignature;
        return d;
    }
    if (msg->header.seq < next_acceptable_seq_) {
        d.reason = RejectReason::kStaleSeq;
        return d;
    }
    if (t_arr < t_last_) {
        d.reason = RejectReason::kProtocolOrder;
        return d;
    }

    d.raw_offset_ns = static_cast<std::int64_t>(msg->origin_timestamp) + path_delay_ns_ -
                      static_cast<std::int64_t>(t_arr);
    d.applied_delta_ns = clamp_correction(d.raw_offset_ns, t_arr, t_last_, config_.net.max_drift_ppb);
    d.clamped = d.applied_delta_ns != d.raw_offset_ns;
    apply_correction(clock_, d.applied_delta_ns);
    next_acceptable_seq_ = msg->header.seq + 1;
    t_last_ = t_arr;
    d.accepted = true;
    return d;
}

BufferDecision Receiver::handle_sync_2step(BytesView bytes, LocalTime t_arr) {
    BufferDecision d;
    auto decoded = wire::decode(bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    auto* msg = std::get_if<wire::Sync2Step>(&std::get<wire::Message>(decoded));
    if (msg == nullptr) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    d.seq = msg->header.seq;
    if (!session_matches(msg->header)) {
        d.reason = RejectReason::kWrongSession;
        return d;
    }
    if (msg->header.seq < next_acceptable_seq_) {
        d.reason = RejectReason::kStaleSeq;
        return d;
    }
    for (const auto& entry : sync_buffer_) {
        if (entry.bytes.size() == bytes.size() && std::equal(bytes.begin(), bytes.end(), entry.bytes.begin())) {
            d.reason = RejectReason::kDuplicate;
            return d;
        }
    }
    if (sync_buffer_.size() >= config_.sync_buffer_capacity) {
        d.reason = RejectReason::kBufferFull;  // DoS containment, not a time effect
        return d;
    }
    sync_buffer_.push_back(BufferedSync{t_arr, msg->header.seq, Bytes(bytes.begin(), bytes.end())});
    d.buffered = true;
    return d;
}

std::int64_t Receiver::trusted_tc_correction(BytesView bytes, const wire::FollowUp& msg) const {
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < msg.tc_blocks.size(); ++i) {
        const auto& block = msg.tc_blocks[i];
        auto trusted = config_.trusted_tcs.find(block.tc_id);
        if (trusted == config_.trusted_tcs.end()) continue;
        Bytes input = wire::tc_sign_input(bytes, i, block.tc_id, block.residence_ns);
        if (!crypto::verify(*config_.scheme, trusted->second, input, block.signature)) continue;
        sum += static_cast<std::int64_t>(block.residence_ns);
    }
    return sum;
}

FollowUpDecision Receiver::handle_followup(BytesView bytes, LocalTime t_arr) {
    FollowUpDecision d;
    auto decoded = wire::decode(bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    auto* msg = std::get_if<wire::FollowUp>(&std::get<wire::Message>(decoded));
    if (msg == nullptr) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    d.seq = msg->header.seq;
    if (!session_matches(msg->header)) {
        d.reason = RejectReason::kWrongSession;
        return d;
    }
    auto portion = wire::signed_portion(bytes, wire::MsgKind::kFollowUp);
    if (!crypto::verify(*config_.scheme, *session_pk_, *portion, msg->signature)) {
        d.reason = RejectReason::kBadSignature;
        return d;
    }
    if (msg->header.seq < next_acceptable_seq_) {
        d.reason = RejectReason::kStaleSeq;
        return d;
    }
    if (msg->header.seq == 0) {  // cannot pair: a sync one below would precede the session
        d.reason = RejectReason::kNoMatchingSync;
        return d;
    }

    const std::uint32_t wanted_seq = msg->header.seq - 1;
    const BufferedSync* matched = nullptr;
    bool seq_candidate_seen = false;
    for (const auto& entry : sync_buffer_) {
        if (entry.seq != wanted_seq) continue;
        seq_candidate_seen = true;
        Bytes linked = entry.bytes;
        linked.insert(linked.end(), session_pk_->bytes.begin(), session_pk_->bytes.end());
        if (crypto::digest(linked) == msg->link_hash) {
            matched = &entry;
            break;
        }
    }

    if (matched == nullptr) {
        // Sender-authenticated evidence that these buffered syncs can never
        // be validated: any later FollowUp carries a higher sequence number.
        d.purged_stale =
            std::erase_if(sync_buffer_, [&](const BufferedSync& e) { return e.seq < msg->header.seq; });
        d.reason = seq_candidate_seen ? RejectReason::kHashMismatch : RejectReason::kNoMatchingSync;
        return d;
    }
    if (t_arr < t_last_) {
        d.reason = RejectReason::kProtocolOrder;
        return d;
    }

    const std::int64_t effective_send = static_cast<std::int64_t>(msg->precise_origin_timestamp) +
                                        msg->correction_ns + trusted_tc_correction(bytes, *msg);
    d.sync_arrival = matched->arrival;
    d.matched_sync_bytes = matched->bytes;
    d.raw_offset_ns = effective_send + path_delay_ns_ - static_cast<std::int64_t>(matched->arrival);
    d.applied_delta_ns = clamp_correction(d.raw_offset_ns, t_arr, t_last_, config_.net.max_drift_ppb);
    d.clamped = d.applied_delta_ns != d.raw_offset_ns;
    apply_correction(clock_, d.applied_delta_ns);
    next_acceptable_seq_ = msg->header.seq + 1;
    t_last_ = t_arr;
    sync_buffer_.clear();
    d.accepted = true;
    return d;
}

TickResult Receiver::tick(LocalTime now) {
    TickResult result;
    if (pending_) {
        if (now >= pending_->deadline) {
            raise(now, AlarmKind::kMeasurementTimeout, "no delay response within twice the maximum delay");
            result.alarm = alarm_log_.back();
            pending_.reset();
            next_measurement_due_ = now + static_cast<LocalTime>(measurement_interval_ns_);
        }
        return result;
    }
    if (!session_key_id_) return result;  // nothing to validate a response against
    if (now >= next_measurement_due_) {
        wire::DelayReq req;
        req.header.session_key_id = own_key_id_;
        req.header.seq = 0;
        req.t1 = now;
        req.receiver_id = config_.receiver_id;
        req.signature = crypto::sign(own_keys_, wire::signing_input(req));
        pending_ = PendingMeasurement{now, now + 2 * static_cast<LocalTime>(config_.net.max_delay_ns)};
        result.request = std::move(req);
    }
    return result;
}

LocalTime Receiver::next_due_local() const {
    if (pending_) return pending_->deadline;
    if (!session_key_id_) return std::numeric_limits<LocalTime>::max();
    return next_measurement_due_;
}

MeasurementDecision Receiver::handle_delay_response(BytesView bytes, LocalTime t4) {
    MeasurementDecision d;
    auto decoded = wire::decode(bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    auto* msg = std::get_if<wire::DelayResp>(&std::get<wire::Message>(decoded));
    if (msg == nullptr) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    if (!pending_ || msg->t1_echo != pending_->t1) {
        d.reason = RejectReason::kUnsolicited;
        return d;
    }
    if (!session_matches(msg->header)) {
        // The session rotated past us (or we never had one): restart by
        // waiting for the next announce; corrections stay suspended since
        // nothing verifies without a session key.
        raise(t4, AlarmKind::kSessionMismatch, "delay response names an unknown session key");
        d.alarm = alarm_log_.back();
        d.reason = RejectReason::kSessionMismatch;
        session_pk_.reset();
        session_key_id_.reset();
        pending_.reset();
        next_measurement_due_ = t4 + static_cast<LocalTime>(measurement_interval_ns_);
        return d;
    }
    auto portion = wire::signed_portion(bytes, wire::MsgKind::kDelayResp);
    if (!crypto::verify(*config_.scheme, *session_pk_, *portion, msg->signature)) {
        d.reason = RejectReason::kBadSignature;
        return d;
    }

    const std::int64_t reply_delay = diff(t4, msg->t3);
    if (reply_delay < config_.net.min_delay_ns || reply_delay > config_.net.max_delay_ns) {
        raise(t4, AlarmKind::kDelayAttackSuspected, "delay response outside the delay envelope");
        d.alarm = alarm_log_.back();
        d.reason = RejectReason::kRangeViolation;
        pending_.reset();
        next_measurement_due_ = t4 + static_cast<LocalTime>(measurement_interval_ns_);
        return d;
    }

    std::int64_t round_trip_half =
        (diff(static_cast<LocalTime>(msg->t2), pending_->t1) + reply_delay) / 2;
    path_delay_ns_ = std::clamp(round_trip_half, config_.net.min_delay_ns, config_.net.max_delay_ns);
    next_acceptable_seq_ = std::max(next_acceptable_seq_, msg->header.seq);
    t_last_ = std::max(t_last_, t4);
    last_measurement_at_ = t4;
    next_measurement_due_ = t4 + static_cast<LocalTime>(measurement_interval_ns_);
    has_measured_ = true;
    pending_.reset();
    sync_buffer_.clear();
    d.updated = true;
    d.path_delay_ns = path_delay_ns_;
    return d;
}

ErrorRespDecision Receiver::handle_error_response(BytesView bytes, LocalTime t_arr) {
    ErrorRespDecision d;
    auto decoded = wire::decode(bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    auto* msg = std::get_if<wire::ErrorResp>(&std::get<wire::Message>(decoded));
    if (msg == nullptr) {
        d.reason = RejectReason::kMalformed;
        return d;
    }
    if (!pending_) {
        d.reason = RejectReason::kUnsolicited;
        return d;
    }
    if (!session_matches(msg->header)) {
        d.reason = RejectReason::kWrongSession;
        return d;
    }
    auto portion = wire::signed_portion(bytes, wire::MsgKind::kErrorResp);
    if (!crypto::verify(*config_.scheme, *session_pk_, *portion, msg->signature)) {
        d.reason = RejectReason::kBadSignature;
        return d;
    }

    if (config_.bootstrap_enabled && !has_measured_) {
        // First measurement ever: adopt the sender's time plus the delay
        // floor outright; sender and receiver may start arbitrarily apart.
        const LocalTime target =
            msg->sender_timestamp + static_cast<LocalTime>(config_.net.min_delay_ns);
        d.applied_delta_ns = diff(target, t_arr);
        apply_correction(clock_, d.applied_delta_ns);
        t_last_ = std::max(t_last_, target);
        last_measurement_at_ = target;
        next_measurement_due_ = target + 4 * static_cast<LocalTime>(config_.net.max_delay_ns);
        has_measured_ = true;
        pending_.reset();
        sync_buffer_.clear();
        d.bootstrapped = true;
        return d;
    }

    raise(t_arr, AlarmKind::kDelayAttackSuspected, "sender reported a suspected delay attack");
    d.alarm = alarm_log_.back();
    pending_.reset();
    next_measurement_due_ = t_arr + static_cast<LocalTime>(measurement_interval_ns_);
    return d;
}

}  // namespace securetime

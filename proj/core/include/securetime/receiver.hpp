#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "securetime/clock.hpp"
#include "securetime/crypto.hpp"
#include "securetime/wire.hpp"

namespace securetime {

enum class RejectReason {
    kNone,
    kMalformed,
    kWrongSession,
    kBadSignature,
    kStaleSeq,
    kDuplicate,
    kBufferFull,
    kNoMatchingSync,
    kHashMismatch,
    kUnsolicited,
    kRangeViolation,
    kSessionMismatch,
    kProtocolOrder,  // arrival reads earlier than the last valid arrival
};

std::string_view reject_reason_name(RejectReason reason);

enum class AlarmKind {
    kDelayAttackSuspected,
    kMeasurementTimeout,
    kSessionMismatch,
};

std::string_view alarm_kind_name(AlarmKind kind);

struct Alarm {
    LocalTime at = 0;
    AlarmKind kind = AlarmKind::kDelayAttackSuspected;
    std::string detail;
    auto operator<=>(const Alarm&) const = default;
};

struct ReceiverConfig {
    const crypto::SignatureScheme* scheme = &crypto::reference_scheme();
    NetParams net;
    std::uint64_t receiver_id = 0;
    std::size_t sync_buffer_capacity = 32;
    // Trust-on-first-use: an error response to the very first delay
    // measurement sets the local clock outright instead of alarming.
    bool bootstrap_enabled = true;
    std::map<std::uint64_t, crypto::PublicKey> trusted_tcs;
    bool operator==(const ReceiverConfig&) const = default;
};

struct AnnounceDecision {
    bool accepted = false;
    bool adopted = false;  // false on the idempotent re-receive path
    RejectReason reason = RejectReason::kNone;
};

struct SyncDecision {
    bool accepted = false;
    RejectReason reason = RejectReason::kNone;
    std::uint32_t seq = 0;
    std::int64_t raw_offset_ns = 0;
    std::int64_t applied_delta_ns = 0;
    bool clamped = false;
};

struct BufferDecision {
    bool buffered = false;
    RejectReason reason = RejectReason::kNone;
    std::uint32_t seq = 0;
};

struct FollowUpDecision {
    bool accepted = false;
    RejectReason reason = RejectReason::kNone;
    std::uint32_t seq = 0;
    std::int64_t raw_offset_ns = 0;
    std::int64_t applied_delta_ns = 0;
    bool clamped = false;
    LocalTime sync_arrival = 0;
    Bytes matched_sync_bytes;  // empty unless accepted
    std::size_t purged_stale = 0;
};

struct TickResult {
    std::optional<wire::DelayReq> request;
    std::optional<Alarm> alarm;
};

struct MeasurementDecision {
    bool updated = false;
    RejectReason reason = RejectReason::kNone;
    std::optional<Alarm> alarm;
    std::int64_t path_delay_ns = 0;
};

struct ErrorRespDecision {
    bool bootstrapped = false;
    RejectReason reason = RejectReason::kNone;
    std::optional<Alarm> alarm;
    std::int64_t applied_delta_ns = 0;
};

struct BufferedSync {
    LocalTime arrival = 0;
    std::uint32_t seq = 0;
    Bytes bytes;
    auto operator<=>(const BufferedSync&) const = default;
};

// Receiver state machine. Every handler validates in a fixed order and
// leaves the state untouched when it rejects; the only exception is a
// FollowUp that carries a valid sender signature and a fresh sequence
// number but matches no buffered sync, which additionally drops buffered
// syncs too old to ever match again. Unauthenticated traffic can never
// trigger that purge.
class Receiver {
  public:
    Receiver(ReceiverConfig config, crypto::PublicKey sender_long_term, crypto::KeyPair own_keys,
             SimClock initial_clock);

    AnnounceDecision handle_session_announce(BytesView bytes);
    SyncDecision handle_sync_1step(BytesView bytes, LocalTime t_arr);
    BufferDecision handle_sync_2step(BytesView bytes, LocalTime t_arr);
    FollowUpDecision handle_followup(BytesView bytes, LocalTime t_arr);
    MeasurementDecision handle_delay_response(BytesView bytes, LocalTime t4);
    ErrorRespDecision handle_error_response(BytesView bytes, LocalTime t_arr);

    // Drives delay measurements: emits a signed request when one is due,
    // raises the timeout alarm when a pending one expires. The first
    // measurement is due immediately (the path delay must be learned before
    // offset corrections mean anything); afterwards the cadence is one
    // measurement interval, with a short retry after a bootstrap.
    TickResult tick(LocalTime now);

    // Earliest local time at which tick() would act.
    LocalTime next_due_local() const;

    const SimClock& clock() const { return clock_; }
    const ReceiverConfig& config() const { return config_; }
    std::uint64_t receiver_id() const { return config_.receiver_id; }
    const crypto::PublicKey& own_public() const { return own_keys_.pub; }
    crypto::KeyId own_key_id() const { return own_key_id_; }
    const std::optional<crypto::KeyId>& session_key_id() const { return session_key_id_; }
    std::uint32_t next_acceptable_seq() const { return next_acceptable_seq_; }
    LocalTime t_last() const { return t_last_; }
    std::int64_t path_delay_ns() const { return path_delay_ns_; }
    std::int64_t measurement_interval() const { return measurement_interval_ns_; }
    LocalTime last_measurement_at() const { return last_measurement_at_; }
    LocalTime next_measurement_due() const { return next_measurement_due_; }
    bool has_pending_measurement() const { return pending_.has_value(); }
    std::optional<LocalTime> pending_deadline() const {
        return pending_ ? std::optional<LocalTime>(pending_->deadline) : std::nullopt;
    }
    const std::vector<BufferedSync>& sync_buffer() const { return sync_buffer_; }
    const std::vector<Alarm>& alarms() const { return alarm_log_; }
    bool has_measured() const { return has_measured_; }

    bool operator==(const Receiver&) const = default;

  private:
    struct PendingMeasurement {
        LocalTime t1 = 0;
        LocalTime deadline = 0;
        auto operator<=>(const PendingMeasurement&) const = default;
    };

    bool session_matches(const wire::Header& header) const;
    std::int64_t trusted_tc_correction(BytesView bytes, const wire::FollowUp& msg) const;
    void raise(LocalTime at, AlarmKind kind, std::string detail);

    ReceiverConfig config_;
    crypto::PublicKey sender_long_term_;
    crypto::KeyPair own_keys_;
    crypto::KeyId own_key_id_;
    SimClock clock_;

    std::optional<crypto::PublicKey> session_pk_;
    std::optional<crypto::KeyId> session_key_id_;
    std::uint32_t next_acceptable_seq_ = 0;
    LocalTime t_last_ = 0;
    std::int64_t path_delay_ns_ = 0;
    std::int64_t measurement_interval_ns_ = 0;
    LocalTime last_measurement_at_ = 0;
    LocalTime next_measurement_due_ = 0;  // first one fires immediately
    std::optional<PendingMeasurement> pending_;
    std::vector<BufferedSync> sync_buffer_;
    std::vector<Alarm> alarm_log_;
    bool has_measured_ = false;
};

}  // namespace securetime

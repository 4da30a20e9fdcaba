#include "doctest.h"
#include "securetime/receiver.hpp"
#include "securetime/sender.hpp"
#include "test_util.hpp"

using namespace securetime;
using securetime::testing::make_keys;

namespace {

// A sender/receiver pair wired directly together, no simulator in between.
struct Pair {
    Pair(SyncMode mode = SyncMode::kOneStep, std::int64_t max_delay = 1'000'000)
        : sender(make_sender_config(mode, max_delay), make_keys(crypto::test_scheme(), 1)),
          rng(99),
          receiver(make_receiver_config(max_delay), sender.long_term_public(),
                   make_keys(crypto::test_scheme(), 2), SimClock{0, 0}) {
        announce_bytes = wire::encode(sender.start_session(rng));
        sender.register_receiver(7, receiver.own_public());
    }

    static SenderConfig make_sender_config(SyncMode mode, std::int64_t max_delay) {
        SenderConfig config;
        config.scheme = &crypto::test_scheme();
        config.net = NetParams{0, max_delay, 100'000};
        config.mode = mode;
        return config;
    }

    static ReceiverConfig make_receiver_config(std::int64_t max_delay) {
        ReceiverConfig config;
        config.scheme = &crypto::test_scheme();
        config.net = NetParams{0, max_delay, 100'000};
        config.receiver_id = 7;
        return config;
    }

    void adopt() { REQUIRE(receiver.handle_session_announce(announce_bytes).adopted); }

    Bytes sync_at(wire::Timestamp origin) { return wire::encode(sender.emit_sync_1step(origin)); }

    Sender sender;
    Rng rng;
    Receiver receiver;
    Bytes announce_bytes;
};

}  // namespace

TEST_CASE("announce adoption, rejection, and idempotence") {
    Pair pair;
    auto first = pair.receiver.handle_session_announce(pair.announce_bytes);
    CHECK(first.adopted);
    CHECK(pair.receiver.session_key_id().has_value());
    CHECK(pair.receiver.next_acceptable_seq() == 0);

    auto again = pair.receiver.handle_session_announce(pair.announce_bytes);
    CHECK(again.accepted);
    CHECK_FALSE(again.adopted);

    Bytes tampered = pair.announce_bytes;
    tampered[20] ^= 0x01;
    auto bad = pair.receiver.handle_session_announce(tampered);
    CHECK_FALSE(bad.accepted);
    CHECK((bad.reason == RejectReason::kBadSignature || bad.reason == RejectReason::kMalformed));
}

TEST_CASE("sync pipeline applies the in-limit offset and tracks freshness") {
    Pair pair;
    pair.adopt();

    // Warm up: accept seqs 0..4 so last_seq is 4; zero raw offsets keep the
    // clock untouched.
    for (std::uint64_t i = 0; i < 5; ++i) {
        auto d = pair.receiver.handle_sync_1step(pair.sync_at(1'000'000'000 * (i + 1)),
                                                 1'000'000'000 * (i + 1));
        REQUIRE(d.accepted);
        REQUIRE(d.applied_delta_ns == 0);
    }
    CHECK(pair.receiver.next_acceptable_seq() == 5);

    // seq=5; raw offset 20 us, limit 100 us -> applied in full
    pair.receiver.handle_session_announce(pair.announce_bytes);
    wire::Sync1Step msg = pair.sender.emit_sync_1step(6'000'000'000);
    Bytes bytes = wire::encode(msg);
    auto d = pair.receiver.handle_sync_1step(bytes, 6'000'000'000 - 20'000);
    CHECK(d.accepted);
    CHECK(d.raw_offset_ns == 20'000);
    CHECK(d.applied_delta_ns == 20'000);
    CHECK_FALSE(d.clamped);
    CHECK(pair.receiver.next_acceptable_seq() == 6);
    CHECK(pair.receiver.clock().offset_ns == 20'000);

    // replayed bytes: stale
    auto replay = pair.receiver.handle_sync_1step(bytes, 6'500'000'000);
    CHECK_FALSE(replay.accepted);
    CHECK(replay.reason == RejectReason::kStaleSeq);
}

TEST_CASE("lost messages are tolerated, overtaken ones rejected") {
    Pair pair;
    pair.adopt();
    Bytes s0 = pair.sync_at(1'000'000'000);
    Bytes s1 = pair.sync_at(2'000'000'000);
    Bytes s2 = pair.sync_at(3'000'000'000);
    Bytes s3 = pair.sync_at(4'000'000'000);

    CHECK(pair.receiver.handle_sync_1step(s0, 1'000'100'000).accepted);
    // s1 and s2 lost; s3 arrives: gap tolerated
    CHECK(pair.receiver.handle_sync_1step(s3, 4'000'100'000).accepted);
    // s1 overtaken, arrives late
    auto late = pair.receiver.handle_sync_1step(s1, 4'000'200'000);
    CHECK_FALSE(late.accepted);
    CHECK(late.reason == RejectReason::kStaleSeq);
}

TEST_CASE("wrong session and bad signature reject without state change") {
    Pair pair;
    pair.adopt();

    Receiver before = pair.receiver;
    wire::Sync1Step msg = pair.sender.emit_sync_1step(1'000'000'000);
    Bytes good = wire::encode(msg);

    Bytes wrong_session = good;
    wrong_session[5] ^= 0xff;  // key id byte
    auto ws = pair.receiver.handle_sync_1step(wrong_session, 1'000'100'000);
    CHECK(ws.reason == RejectReason::kWrongSession);
    CHECK(pair.receiver == before);

    Bytes bad_sig = good;
    bad_sig[30] ^= 0x01;  // inside the signed portion
    auto bs = pair.receiver.handle_sync_1step(bad_sig, 1'000'100'000);
    CHECK(bs.reason == RejectReason::kBadSignature);
    CHECK(pair.receiver == before);

    auto mal = pair.receiver.handle_sync_1step(Bytes{1, 2, 3}, 1'000'100'000);
    CHECK(mal.reason == RejectReason::kMalformed);
    CHECK(pair.receiver == before);
}

TEST_CASE("clamped partial application still advances freshness state") {
    Pair pair;
    pair.adopt();
    // raw offset 500 us against a 100 us limit after 1 s
    auto d = pair.receiver.handle_sync_1step(pair.sync_at(1'000'500'000), 1'000'000'000);
    CHECK(d.accepted);
    CHECK(d.clamped);
    CHECK(d.raw_offset_ns == 500'000);
    CHECK(d.applied_delta_ns == 100'000);
    CHECK(pair.receiver.t_last() == 1'000'000'000);
    CHECK(pair.receiver.next_acceptable_seq() == 1);
}

TEST_CASE("two-step buffering: dedup, capacity, no state change") {
    Pair pair(SyncMode::kTwoStep);
    pair.adopt();

    wire::Sync2Step sync = pair.sender.emit_sync_2step(pair.rng);
    Bytes bytes = wire::encode(sync);
    auto first = pair.receiver.handle_sync_2step(bytes, 1'000'000'000);
    CHECK(first.buffered);
    CHECK(pair.receiver.t_last() == 0);  // unsigned messages change no clock state
    CHECK(pair.receiver.next_acceptable_seq() == 0);

    auto dup = pair.receiver.handle_sync_2step(bytes, 1'000'200'000);
    CHECK_FALSE(dup.buffered);
    CHECK(dup.reason == RejectReason::kDuplicate);

    // fill to capacity with distinct forgeries (content is unauthenticated)
    Bytes variant = bytes;
    for (std::size_t i = pair.receiver.sync_buffer().size(); i < 32; ++i) {
        variant[17] = static_cast<std::uint8_t>(i);
        REQUIRE(pair.receiver.handle_sync_2step(variant, 1'000'300'000).buffered);
    }
    variant[17] = 0xEE;
    auto full = pair.receiver.handle_sync_2step(variant, 1'000'400'000);
    CHECK_FALSE(full.buffered);
    CHECK(full.reason == RejectReason::kBufferFull);
    CHECK(pair.receiver.sync_buffer().size() == 32);
}

TEST_CASE("matched followup applies the correction and clears the buffer") {
    Pair pair(SyncMode::kTwoStep);
    pair.adopt();

    wire::Sync2Step sync = pair.sender.emit_sync_2step(pair.rng);
    Bytes sync_bytes = wire::encode(sync);
    REQUIRE(pair.receiver.handle_sync_2step(sync_bytes, 1'000'300'000).buffered);

    wire::FollowUp followup = pair.sender.emit_followup(1'000'000'000);
    Bytes fu_bytes = wire::encode(followup);
    auto d = pair.receiver.handle_followup(fu_bytes, 1'001'300'000);
    CHECK(d.accepted);
    // raw = precise_origin + path_delay(0) - sync arrival
    CHECK(d.raw_offset_ns == -300'000);
    CHECK(d.clamped);  // limit was ~100 us
    CHECK(pair.receiver.sync_buffer().empty());
    CHECK(pair.receiver.next_acceptable_seq() == followup.header.seq + 1);
    CHECK(pair.receiver.t_last() == 1'001'300'000);
}

TEST_CASE("followup with a flipped hash rejects both messages") {
    Pair pair(SyncMode::kTwoStep);
    pair.adopt();
    Bytes sync_bytes = wire::encode(pair.sender.emit_sync_2step(pair.rng));
    REQUIRE(pair.receiver.handle_sync_2step(sync_bytes, 1'000'000'000).buffered);

    wire::FollowUp followup = pair.sender.emit_followup(1'000'000'000);
    followup.link_hash[4] ^= 0x20;
    followup.signature = crypto::sign(pair.sender.session().keypair, wire::signing_input(followup));
    auto d = pair.receiver.handle_followup(wire::encode(followup), 1'000'500'000);
    CHECK_FALSE(d.accepted);
    CHECK(d.reason == RejectReason::kHashMismatch);
    CHECK(pair.receiver.clock().offset_ns == 0);
    // the unmatched sync is authenticated garbage now; it was purged
    CHECK(pair.receiver.sync_buffer().empty());
}

TEST_CASE("sync replayed from a previous session never validates") {
    Pair pair(SyncMode::kTwoStep);
    pair.adopt();
    Bytes old_sync = wire::encode(pair.sender.emit_sync_2step(pair.rng));
    (void)pair.sender.emit_followup(0);

    // rotate; receiver adopts the new session
    Bytes new_announce = wire::encode(pair.sender.start_session(pair.rng));
    REQUIRE(pair.receiver.handle_session_announce(new_announce).adopted);

    // the replayed old sync still buffers (content is unauthenticated)...
    Bytes replayed = old_sync;
    std::copy_n(new_announce.begin() + 4, 8, replayed.begin() + 4);  // forge current key id
    REQUIRE(pair.receiver.handle_sync_2step(replayed, 2'000'000'000).buffered);

    // ...but the current session's followup hashes over the new public key,
    // so the old bytes cannot match.
    (void)pair.sender.emit_sync_2step(pair.rng);
    wire::FollowUp followup = pair.sender.emit_followup(2'000'000'000);
    auto d = pair.receiver.handle_followup(wire::encode(followup), 2'000'500'000);
    CHECK_FALSE(d.accepted);
    CHECK(d.reason == RejectReason::kHashMismatch);
}

TEST_CASE("rejections of unauthenticated followups are state-pure") {
    Pair pair(SyncMode::kTwoStep);
    pair.adopt();
    Bytes sync_bytes = wire::encode(pair.sender.emit_sync_2step(pair.rng));
    REQUIRE(pair.receiver.handle_sync_2step(sync_bytes, 1'000'000'000).buffered);
    Receiver before = pair.receiver;

    wire::FollowUp followup = pair.sender.emit_followup(1'000'000'000);
    Bytes fu = wire::encode(followup);

    Bytes bad_sig = fu;
    bad_sig[40] ^= 0x01;
    auto d = pair.receiver.handle_followup(bad_sig, 1'000'500'000);
    CHECK(d.reason == RejectReason::kBadSignature);
    CHECK(pair.receiver == before);  // buffer intact: forgeries cannot purge

    Bytes wrong_session = fu;
    wrong_session[6] ^= 0xff;
    CHECK(pair.receiver.handle_followup(wrong_session, 1'000'500'000).reason ==
          RejectReason::kWrongSession);
    CHECK(pair.receiver == before);
}

TEST_CASE("measurement tick cadence and timeout alarm") {
    Pair pair;  // dmax = 1 ms -> interval = 2*(1ms)/100ppm = 20 s
    pair.adopt();
    CHECK(pair.receiver.measurement_interval() == 20'000'000'000);

    // the first measurement is due immediately
    auto due = pair.receiver.tick(100);
    REQUIRE(due.request.has_value());
    CHECK(due.request->t1 == 100);
    CHECK(pair.receiver.has_pending_measurement());
    CHECK(pair.receiver.pending_deadline() == 100 + 2'000'000);

    // second tick while pending, before the deadline: nothing
    auto pending = pair.receiver.tick(1'000'000);
    CHECK_FALSE(pending.request.has_value());
    CHECK_FALSE(pending.alarm.has_value());

    auto timeout = pair.receiver.tick(2'000'100);
    REQUIRE(timeout.alarm.has_value());
    CHECK(timeout.alarm->kind == AlarmKind::kMeasurementTimeout);
    CHECK_FALSE(pair.receiver.has_pending_measurement());

    // after a timeout the retry backs off one full interval
    CHECK(pair.receiver.next_measurement_due() == 2'000'100 + 20'000'000'000);
    CHECK_FALSE(pair.receiver.tick(3'000'000).request.has_value());
    CHECK(pair.receiver.tick(20'002'000'100).request.has_value());
}

TEST_CASE("measurement interval example: 5ms spread at 100ppm is 100 s") {
    ReceiverConfig config;
    config.scheme = &crypto::test_scheme();
    config.net = NetParams{0, 5'000'000, 100'000};
    Receiver rx(config, make_keys(crypto::test_scheme(), 1).pub, make_keys(crypto::test_scheme(), 2),
                SimClock{});
    CHECK(rx.measurement_interval() == 100'000'000'000);
}

TEST_CASE("delay response updates path delay and freshness state") {
    Pair pair;
    pair.adopt();
    auto tick = pair.receiver.tick(20'000'000'000);
    REQUIRE(tick.request.has_value());

    // symmetric 400 us legs
    Bytes req_bytes = wire::encode(*tick.request);
    auto response =
        pair.sender.handle_delay_request(req_bytes, 20'000'400'000, 20'000'400'000);
    REQUIRE(response.has_value());
    auto d = pair.receiver.handle_delay_response(wire::encode(*response), 20'000'800'000);
    CHECK(d.updated);
    CHECK(d.path_delay_ns == 400'000);
    CHECK(pair.receiver.path_delay_ns() == 400'000);
    CHECK(pair.receiver.t_last() == 20'000'800'000);
    CHECK(pair.receiver.last_measurement_at() == 20'000'800'000);
    CHECK_FALSE(pair.receiver.has_pending_measurement());
    CHECK(pair.receiver.next_acceptable_seq() == pair.sender.session().next_seq);

    // a replayed response echoes a stale t1: dropped silently
    auto replay = pair.receiver.handle_delay_response(wire::encode(*response), 20'000'900'000);
    CHECK_FALSE(replay.updated);
    CHECK(replay.reason == RejectReason::kUnsolicited);
}

TEST_CASE("out-of-envelope delay response raises the alarm") {
    Pair pair;
    pair.adopt();
    auto tick = pair.receiver.tick(20'000'000'000);
    REQUIRE(tick.request.has_value());
    auto response =
        pair.sender.handle_delay_request(wire::encode(*tick.request), 20'000'400'000, 20'000'400'000);
    REQUIRE(response.has_value());

    // reply leg of 3 ms against a 1 ms envelope
    auto d = pair.receiver.handle_delay_response(wire::encode(*response), 20'003'400'000);
    CHECK_FALSE(d.updated);
    CHECK(d.reason == RejectReason::kRangeViolation);
    REQUIRE(d.alarm.has_value());
    CHECK(d.alarm->kind == AlarmKind::kDelayAttackSuspected);
}

TEST_CASE("delay response from an unknown session key suspends the session") {
    Pair pair;
    pair.adopt();
    auto tick = pair.receiver.tick(20'000'000'000);
    REQUIRE(tick.request.has_value());
    Bytes req_bytes = wire::encode(*tick.request);

    // sender rotated without the receiver noticing
    pair.sender.start_session(pair.rng);
    auto response = pair.sender.handle_delay_request(req_bytes, 20'000'400'000, 20'000'400'000);
    REQUIRE(response.has_value());
    auto d = pair.receiver.handle_delay_response(wire::encode(*response), 20'000'800'000);
    CHECK(d.reason == RejectReason::kSessionMismatch);
    REQUIRE(d.alarm.has_value());
    CHECK(d.alarm->kind == AlarmKind::kSessionMismatch);
    CHECK_FALSE(pair.receiver.session_key_id().has_value());

    // corrections stay suspended until the next announce
    CHECK(pair.receiver.handle_sync_1step(pair.sync_at(1), 20'000'900'000).reason ==
          RejectReason::kWrongSession);
    Bytes announce = wire::encode(pair.sender.start_session(pair.rng));
    CHECK(pair.receiver.handle_session_announce(announce).adopted);
}

TEST_CASE("first-measurement error response bootstraps the clock") {
    Pair pair;
    pair.adopt();
    pair.receiver = Receiver(Pair::make_receiver_config(1'000'000), pair.sender.long_term_public(),
                             make_keys(crypto::test_scheme(), 2), SimClock{3'000'000, 0});
    pair.adopt();

    auto tick = pair.receiver.tick(20'003'000'000);
    REQUIRE(tick.request.has_value());
    auto response = pair.sender.handle_delay_request(wire::encode(*tick.request), 20'000'500'000,
                                                     20'000'500'000);
    REQUIRE(response.has_value());
    REQUIRE(std::holds_alternative<wire::ErrorResp>(*response));

    auto d = pair.receiver.handle_error_response(wire::encode(*response), 20'003'500'000);
    CHECK(d.bootstrapped);
    CHECK_FALSE(d.alarm.has_value());
    // local clock now reads sender_timestamp + min_delay
    CHECK(pair.receiver.clock().offset_ns == 3'000'000 + d.applied_delta_ns);
    CHECK(pair.receiver.has_measured());

    // a second error response is an alarm, not a bootstrap
    auto tick2 = pair.receiver.tick(pair.receiver.last_measurement_at() + 20'000'000'000);
    REQUIRE(tick2.request.has_value());
    auto response2 = pair.sender.handle_delay_request(wire::encode(*tick2.request), 60'000'000'000,
                                                      60'000'000'000);
    REQUIRE(response2.has_value());
    REQUIRE(std::holds_alternative<wire::ErrorResp>(*response2));
    auto d2 = pair.receiver.handle_error_response(wire::encode(*response2), 60'000'500'000);
    CHECK_FALSE(d2.bootstrapped);
    REQUIRE(d2.alarm.has_value());
    CHECK(d2.alarm->kind == AlarmKind::kDelayAttackSuspected);
}

TEST_CASE("bootstrap disabled turns the first error response into an alarm") {
    ReceiverConfig config = Pair::make_receiver_config(1'000'000);
    config.bootstrap_enabled = false;
    Pair pair;
    pair.receiver = Receiver(config, pair.sender.long_term_public(),
                             make_keys(crypto::test_scheme(), 2), SimClock{});
    pair.adopt();
    auto tick = pair.receiver.tick(20'000'000'000);
    REQUIRE(tick.request.has_value());
    auto response = pair.sender.handle_delay_request(wire::encode(*tick.request), 25'000'000'000,
                                                     25'000'000'000);
    REQUIRE(response.has_value());
    auto d = pair.receiver.handle_error_response(wire::encode(*response), 20'000'500'000);
    CHECK_FALSE(d.bootstrapped);
    CHECK(d.alarm.has_value());
}

TEST_CASE("accepted corrections never exceed the clamp ceiling") {
    Pair pair;
    pair.adopt();
    Rng rng(55);
    LocalTime arrival = 100'000'000;
    for (int i = 0; i < 500; ++i) {
        const LocalTime t_last = pair.receiver.t_last();
        wire::Timestamp origin = arrival + static_cast<wire::Timestamp>(rng.range_i64(-800'000, 800'000));
        auto d = pair.receiver.handle_sync_1step(wire::encode(pair.sender.emit_sync_1step(origin)), arrival);
        REQUIRE(d.accepted);
        const std::int64_t limit =
            scale_ppb(static_cast<std::int64_t>(arrival - t_last), 100'000);
        REQUIRE(std::abs(d.applied_delta_ns) <= limit);
        arrival += static_cast<LocalTime>(rng.bounded(2'000'000'000));
    }
}

TEST_CASE("sync replayed after its own followup is stale") {
    Pair pair(SyncMode::kTwoStep);
    pair.adopt();
    Bytes sync_bytes = wire::encode(pair.sender.emit_sync_2step(pair.rng));
    REQUIRE(pair.receiver.handle_sync_2step(sync_bytes, 1'000'000'000).buffered);
    wire::FollowUp followup = pair.sender.emit_followup(1'000'000'000);
    REQUIRE(pair.receiver.handle_followup(wire::encode(followup), 1'000'500'000).accepted);

    auto replayed = pair.receiver.handle_sync_2step(sync_bytes, 1'200'000'000);
    CHECK_FALSE(replayed.buffered);
    CHECK(replayed.reason == RejectReason::kStaleSeq);
}

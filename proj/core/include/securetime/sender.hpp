#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "securetime/clock.hpp"
#include "securetime/crypto.hpp"
#include "securetime/rng.hpp"
#include "securetime/wire.hpp"

namespace securetime {

enum class SyncMode { kOneStep, kTwoStep };

struct RotationRequired : std::runtime_error {
    RotationRequired() : std::runtime_error("session rotation required before emitting") {}
};

struct SenderConfig {
    const crypto::SignatureScheme* scheme = &crypto::reference_scheme();
    NetParams net;
    SyncMode mode = SyncMode::kOneStep;
    std::uint32_t rotation_threshold = wire::kSeqRotationThreshold;
    // 0 selects the full 128-bit nonce space. A small override shrinks the
    // space to [0, n) with draws unique per session; test-only.
    std::uint64_t nonce_space = 0;
};

// Per-session signing state. The sequence counter covers every multicast
// message (announce excluded: it names the next sequence number but does not
// consume one), so the FollowUp sits exactly one above its Sync2Step.
struct SessionContext {
    crypto::KeyPair keypair;
    crypto::KeyId key_id;
    std::uint32_t next_seq = 0;
    std::uint64_t nonces_used = 0;
    Bytes announce_bytes;  // cached; re-broadcasts are byte-identical
    std::set<std::uint64_t> drawn_nonces;  // only tracked for reduced nonce spaces
    auto operator<=>(const SessionContext&) const = default;
};

struct PendingTwoStep {
    Bytes sync_bytes;
    std::uint32_t seq = 0;
    auto operator<=>(const PendingTwoStep&) const = default;
};

class Sender {
  public:
    Sender(SenderConfig config, crypto::KeyPair long_term);

    wire::SessionAnnounce start_session(Rng& rng);
    std::optional<wire::SessionAnnounce> maybe_rotate_session(Rng& rng);

    wire::Sync1Step emit_sync_1step(wire::Timestamp now_sender);

    // Unsigned marker; the exact emitted bytes are held as the pending
    // two-step state until the FollowUp is cut.
    wire::Sync2Step emit_sync_2step(Rng& rng);
    wire::FollowUp emit_followup(wire::Timestamp precise_send_time);

    void register_receiver(std::uint64_t receiver_id, crypto::PublicKey pk);

    // Authenticated delay-measurement responder. Unknown or unauthenticated
    // requests are dropped without a reply; in-window requests get a
    // DelayResp, out-of-window ones an ErrorResp naming a suspected delay
    // attack. At most one request per receiver is answered per max-delay
    // window.
    std::optional<wire::Message> handle_delay_request(BytesView request_bytes, wire::Timestamp t2,
                                                      wire::Timestamp t3);

    const SessionContext& session() const { return session_; }
    SessionContext& session_for_test() { return session_; }
    const crypto::PublicKey& long_term_public() const { return long_term_.pub; }
    const SenderConfig& config() const { return config_; }
    const std::optional<PendingTwoStep>& pending() const { return pending_; }

  private:
    std::uint32_t take_seq();
    wire::Nonce draw_nonce(Rng& rng);

    SenderConfig config_;
    crypto::KeyPair long_term_;
    crypto::KeyId long_term_key_id_;
    SessionContext session_;
    std::optional<PendingTwoStep> pending_;
    std::map<std::uint64_t, crypto::PublicKey> receivers_;
    std::map<std::uint64_t, wire::Timestamp> last_answered_;
};

}  // namespace securetime

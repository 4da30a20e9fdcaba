#include "securetime/sender.hpp"

#include <cstring>

namespace securetime {

Sender::Sender(SenderConfig config, crypto::KeyPair long_term)
    : config_(config), long_term_(std::move(long_term)) {
    config_.net.validate();
    if (config_.scheme == nullptr) throw std::invalid_argument("Sender: no signature scheme");
    if (long_term_.scheme != config_.scheme->id)
        throw std::invalid_argument("Sender: long-term key scheme mismatch");
    long_term_key_id_ = crypto::key_id_for(long_term_.pub);
}

wire::SessionAnnounce Sender::start_session(Rng& rng) {
    SessionContext fresh;
    fresh.keypair = crypto::generate_keypair(*config_.scheme, rng.next_seed32());
    fresh.key_id = crypto::key_id_for(fresh.keypair.pub);
    if (fresh.key_id == long_term_key_id_ || (!session_.announce_bytes.empty() && fresh.key_id == session_.key_id))
        throw std::runtime_error("key id collision: fatal configuration error");

    wire::SessionAnnounce announce;
    announce.header.session_key_id = fresh.key_id;
    announce.header.seq = 0;
    announce.session_public_key = fresh.keypair.pub;
    announce.long_term_signature = crypto::sign(long_term_, wire::signing_input(announce));

    fresh.announce_bytes = wire::encode(announce);
    session_ = std::move(fresh);
    pending_.reset();
    return announce;
}

std::optional<wire::SessionAnnounce> Sender::maybe_rotate_session(Rng& rng) {
    const std::uint32_t headroom = config_.mode == SyncMode::kTwoStep ? 1 : 0;
    if (session_.next_seq >= config_.rotation_threshold - headroom) return start_session(rng);
    return std::nullopt;
}

std::uint32_t Sender::take_seq() {
    if (session_.next_seq >= config_.rotation_threshold) throw RotationRequired{};
    return session_.next_seq++;
}

wire::Sync1Step Sender::emit_sync_1step(wire::Timestamp now_sender) {
    if (session_.announce_bytes.empty()) throw std::logic_error("emit before start_session");
    if (config_.mode != SyncMode::kOneStep) throw std::logic_error("sender is in 2-step mode");
    wire::Sync1Step msg;
    msg.header.session_key_id = session_.key_id;
    msg.header.seq = take_seq();
    msg.origin_timestamp = now_sender;
    msg.signature = crypto::sign(session_.keypair, wire::signing_input(msg));
    return msg;
}

wire::Nonce Sender::draw_nonce(Rng& rng) {
    wire::Nonce nonce{};
    if (config_.nonce_space == 0) {
        Bytes raw;
        rng.fill(raw, wire::kNonceLen);
        std::memcpy(nonce.data(), raw.data(), wire::kNonceLen);
        return nonce;
    }
    // Reduced space: unique within the session, value in the low 8 bytes.
    if (session_.drawn_nonces.size() >= config_.nonce_space)
        throw std::runtime_error("nonce space exhausted for this session");
    std::uint64_t value = rng.bounded(config_.nonce_space);
    while (session_.drawn_nonces.contains(value)) value = rng.bounded(config_.nonce_space);
    session_.drawn_nonces.insert(value);
    for (int i = 0; i < 8; ++i) nonce[8 + i] = static_cast<std::uint8_t>(value >> (56 - 8 * i));
    return nonce;
}

wire::Sync2Step Sender::emit_sync_2step(Rng& rng) {
    if (session_.announce_bytes.empty()) throw std::logic_error("emit before start_session");
    if (config_.mode != SyncMode::kTwoStep) throw std::logic_error("sender is in 1-step mode");
    if (session_.next_seq + 1 >= config_.rotation_threshold) throw RotationRequired{};
    wire::Sync2Step msg;
    msg.header.session_key_id = session_.key_id;
    msg.header.seq = take_seq();
    msg.nonce = draw_nonce(rng);
    session_.nonces_used += 1;
    pending_ = PendingTwoStep{wire::encode(msg), msg.header.seq};
    return msg;
}

wire::FollowUp Sender::emit_followup(wire::Timestamp precise_send_time) {
    if (!pending_) throw std::logic_error("emit_followup without a pending sync");
    wire::FollowUp msg;
    msg.header.session_key_id = session_.key_id;
    msg.header.seq = take_seq();
    if (msg.header.seq != pending_->seq + 1)
        throw std::logic_error("followup sequence number out of step with pending sync");
    msg.precise_origin_timestamp = precise_send_time;
    msg.correction_ns = 0;

    Bytes linked = pending_->sync_bytes;
    linked.insert(linked.end(), session_.keypair.pub.bytes.begin(), session_.keypair.pub.bytes.end());
    msg.link_hash = crypto::digest(linked);

    msg.signature = crypto::sign(session_.keypair, wire::signing_input(msg));
    pending_.reset();
    return msg;
}

void Sender::register_receiver(std::uint64_t receiver_id, crypto::PublicKey pk) {
    receivers_[receiver_id] = pk;
}

std::optional<wire::Message> Sender::handle_delay_request(BytesView request_bytes, wire::Timestamp t2,
                                                          wire::Timestamp t3) {
    auto decoded = wire::decode(request_bytes);
    if (!std::holds_alternative<wire::Message>(decoded)) return std::nullopt;
    auto* req = std::get_if<wire::DelayReq>(&std::get<wire::Message>(decoded));
    if (req == nullptr || req->header.seq != 0) return std::nullopt;

    auto it = receivers_.find(req->receiver_id);
    if (it == receivers_.end()) return std::nullopt;
    if (crypto::key_id_for(it->second) != req->header.session_key_id) return std::nullopt;

    auto portion = wire::signed_portion(request_bytes, wire::MsgKind::kDelayReq);
    if (!portion || !crypto::verify(*config_.scheme, it->second, *portion, req->signature)) return std::nullopt;

    auto answered = last_answered_.find(req->receiver_id);
    if (answered != last_answered_.end() &&
        static_cast<std::int64_t>(t2) - static_cast<std::int64_t>(answered->second) < config_.net.max_delay_ns)
        return std::nullopt;
    last_answered_[req->receiver_id] = t2;

    const std::int64_t observed = static_cast<std::int64_t>(t2) - static_cast<std::int64_t>(req->t1);
    if (observed >= config_.net.min_delay_ns && observed <= config_.net.max_delay_ns) {
        wire::DelayResp resp;
        resp.header.session_key_id = session_.key_id;
        resp.header.seq = session_.next_seq;
        resp.t1_echo = req->t1;
        resp.t2 = t2;
        resp.t3 = t3;
        resp.signature = crypto::sign(session_.keypair, wire::signing_input(resp));
        return wire::Message{std::move(resp)};
    }

    wire::ErrorResp err;
    err.header.session_key_id = session_.key_id;
    err.header.seq = session_.next_seq;
    err.sender_timestamp = t3;
    err.reason = wire::kReasonSuspectedDelayAttack;
    err.signature = crypto::sign(session_.keypair, wire::signing_input(err));
    return wire::Message{std::move(err)};
}

}  // namespace securetime

#include "securetime/wire.hpp"

#include <cstring>
#include <stdexcept>

namespace securetime::wire {

namespace {

constexpr std::size_t kSigLen = crypto::kSignatureLen;
constexpr std::size_t kPkLen = crypto::kPublicKeyLen;

constexpr std::size_t kAnnounceLen = kHeaderLen + kPkLen + kSigLen;              // 112
constexpr std::size_t kSync1Len = kHeaderLen + 8 + kSigLen;                      // 88
constexpr std::size_t kSync2Len = kHeaderLen + kNonceLen;                        // 32
constexpr std::size_t kFollowUpBaseLen = kHeaderLen + 8 + 8 + 32 + 1 + kSigLen;  // 129
constexpr std::size_t kDelayReqLen = kHeaderLen + 8 + 8 + kSigLen;               // 96
constexpr std::size_t kDelayRespLen = kHeaderLen + 8 + 8 + 8 + kSigLen;          // 104
constexpr std::size_t kErrorRespLen = kHeaderLen + 8 + 1 + kSigLen;              // 89

constexpr std::size_t kFollowUpSignedLen = kHeaderLen + 8 + 8 + 32;  // up to tc_block_count

void put_header(Bytes& out, MsgKind kind, const Header& h) {
    out.push_back(kMagic0);
    out.push_back(kMagic1);
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(kind));
    out.insert(out.end(), h.session_key_id.bytes.begin(), h.session_key_id.bytes.end());
    put_u32(out, h.seq);
}

Header get_header(BytesView in) {
    Header h;
    std::memcpy(h.session_key_id.bytes.data(), in.data() + 4, crypto::kKeyIdLen);
    h.seq = get_u32(in, 12);
    return h;
}

void put_signature(Bytes& out, const Bytes& sig) {
    if (sig.size() != kSigLen) throw std::invalid_argument("signature field must be 64 bytes");
    out.insert(out.end(), sig.begin(), sig.end());
}

Bytes get_bytes(BytesView in, std::size_t at, std::size_t n) {
    return Bytes(in.begin() + static_cast<std::ptrdiff_t>(at),
                 in.begin() + static_cast<std::ptrdiff_t>(at + n));
}

}  // namespace

std::string_view kind_name(MsgKind kind) {
    switch (kind) {
        case MsgKind::kSessionAnnounce: return "session-announce";
        case MsgKind::kSync1Step: return "sync-1step";
        case MsgKind::kSync2Step: return "sync-2step";
        case MsgKind::kFollowUp: return "followup";
        case MsgKind::kDelayReq: return "delay-req";
        case MsgKind::kDelayResp: return "delay-resp";
        case MsgKind::kErrorResp: return "error-resp";
    }
    return "unknown";
}

std::string_view decode_error_name(DecodeError err) {
    switch (err) {
        case DecodeError::kBadMagic: return "bad-magic";
        case DecodeError::kBadVersion: return "bad-version";
        case DecodeError::kUnknownKind: return "unknown-kind";
        case DecodeError::kTruncated: return "truncated";
        case DecodeError::kTrailingBytes: return "trailing-bytes";
        case DecodeError::kFieldRange: return "field-range";
    }
    return "unknown";
}

Bytes signing_input(const SessionAnnounce& msg) {
    Bytes out;
    out.reserve(kAnnounceLen);
    put_header(out, MsgKind::kSessionAnnounce, msg.header);
    out.insert(out.end(), msg.session_public_key.bytes.begin(), msg.session_public_key.bytes.end());
    return out;
}

Bytes encode(const SessionAnnounce& msg) {
    Bytes out = signing_input(msg);
    put_signature(out, msg.long_term_signature);
    return out;
}

Bytes signing_input(const Sync1Step& msg) {
    Bytes out;
    out.reserve(kSync1Len);
    put_header(out, MsgKind::kSync1Step, msg.header);
    put_u64(out, msg.origin_timestamp);
    return out;
}

Bytes encode(const Sync1Step& msg) {
    Bytes out = signing_input(msg);
    put_signature(out, msg.signature);
    return out;
}

Bytes encode(const Sync2Step& msg) {
    Bytes out;
    out.reserve(kSync2Len);
    put_header(out, MsgKind::kSync2Step, msg.header);
    out.insert(out.end(), msg.nonce.begin(), msg.nonce.end());
    return out;
}

Bytes signing_input(const FollowUp& msg) {
    Bytes out;
    out.reserve(kFollowUpSignedLen);
    put_header(out, MsgKind::kFollowUp, msg.header);
    put_u64(out, msg.precise_origin_timestamp);
    put_i64(out, msg.correction_ns);
    out.insert(out.end(), msg.link_hash.begin(), msg.link_hash.end());
    return out;
}

Bytes encode(const FollowUp& msg) {
    if (msg.tc_blocks.size() > 255) throw std::invalid_argument("too many transparent-clock blocks");
    Bytes out = signing_input(msg);
    out.push_back(static_cast<std::uint8_t>(msg.tc_blocks.size()));
    for (const auto& block : msg.tc_blocks) {
        put_u64(out, block.tc_id);
        put_u64(out, block.residence_ns);
        put_signature(out, block.signature);
    }
    put_signature(out, msg.signature);
    return out;
}

Bytes signing_input(const DelayReq& msg) {
    Bytes out;
    out.reserve(kDelayReqLen);
    put_header(out, MsgKind::kDelayReq, msg.header);
    put_u64(out, msg.t1);
    put_u64(out, msg.receiver_id);
    return out;
}

Bytes encode(const DelayReq& msg) {
    Bytes out = signing_input(msg);
    put_signature(out, msg.signature);
    return out;
}

Bytes signing_input(const DelayResp& msg) {
    Bytes out;
    out.reserve(kDelayRespLen);
    put_header(out, MsgKind::kDelayResp, msg.header);
    put_u64(out, msg.t1_echo);
    put_u64(out, msg.t2);
    put_u64(out, msg.t3);
    return out;
}

Bytes encode(const DelayResp& msg) {
    Bytes out = signing_input(msg);
    put_signature(out, msg.signature);
    return out;
}

Bytes signing_input(const ErrorResp& msg) {
    Bytes out;
    out.reserve(kErrorRespLen);
    put_header(out, MsgKind::kErrorResp, msg.header);
    put_u64(out, msg.sender_timestamp);
    out.push_back(msg.reason);
    return out;
}

Bytes encode(const ErrorResp& msg) {
    Bytes out = signing_input(msg);
    put_signature(out, msg.signature);
    return out;
}

Bytes encode(const Message& msg) {
    return std::visit([](const auto& m) { return encode(m); }, msg);
}

MsgKind kind_of(const Message& msg) {
    return std::visit(
        [](const auto& m) -> MsgKind {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SessionAnnounce>) return MsgKind::kSessionAnnounce;
            if constexpr (std::is_same_v<T, Sync1Step>) return MsgKind::kSync1Step;
            if constexpr (std::is_same_v<T, Sync2Step>) return MsgKind::kSync2Step;
            if constexpr (std::is_same_v<T, FollowUp>) return MsgKind::kFollowUp;
            if constexpr (std::is_same_v<T, DelayReq>) return MsgKind::kDelayReq;
            if constexpr (std::is_same_v<T, DelayResp>) return MsgKind::kDelayResp;
            if constexpr (std::is_same_v<T, ErrorResp>) return MsgKind::kErrorResp;
        },
        msg);
}

std::uint32_t seq_of(const Message& msg) {
    return std::visit([](const auto& m) { return m.header.seq; }, msg);
}

crypto::KeyId key_id_of(const Message& msg) {
    return std::visit([](const auto& m) { return m.header.session_key_id; }, msg);
}

DecodeResult decode(BytesView bytes) {
    if (bytes.size() < kHeaderLen) return DecodeError::kTruncated;
    if (bytes[0] != kMagic0 || bytes[1] != kMagic1) return DecodeError::kBadMagic;
    if (bytes[2] != kVersion) return DecodeError::kBadVersion;
    const std::uint8_t kind = bytes[3];
    if (kind < 1 || kind > 7) return DecodeError::kUnknownKind;
    const Header header = get_header(bytes);

    switch (static_cast<MsgKind>(kind)) {
        case MsgKind::kSessionAnnounce: {
            if (bytes.size() < kAnnounceLen) return DecodeError::kTruncated;
            if (bytes.size() > kAnnounceLen) return DecodeError::kTrailingBytes;
            SessionAnnounce m;
            m.header = header;
            std::memcpy(m.session_public_key.bytes.data(), bytes.data() + kHeaderLen, kPkLen);
            m.long_term_signature = get_bytes(bytes, kHeaderLen + kPkLen, kSigLen);
            return Message{std::move(m)};
        }
        case MsgKind::kSync1Step: {
            if (bytes.size() < kSync1Len) return DecodeError::kTruncated;
            if (bytes.size() > kSync1Len) return DecodeError::kTrailingBytes;
            Sync1Step m;
            m.header = header;
            m.origin_timestamp = get_u64(bytes, kHeaderLen);
            m.signature = get_bytes(bytes, kHeaderLen + 8, kSigLen);
            return Message{std::move(m)};
        }
        case MsgKind::kSync2Step: {
            if (bytes.size() < kSync2Len) return DecodeError::kTruncated;
            if (bytes.size() > kSync2Len) return DecodeError::kTrailingBytes;
            Sync2Step m;
            m.header = header;
            std::memcpy(m.nonce.data(), bytes.data() + kHeaderLen, kNonceLen);
            return Message{std::move(m)};
        }
        case MsgKind::kFollowUp: {
            if (bytes.size() < kFollowUpBaseLen) return DecodeError::kTruncated;
            const std::size_t count = bytes[kFollowUpSignedLen];
            const std::size_t expected = kFollowUpBaseLen + count * kTcBlockLen;
            if (bytes.size() < expected) return DecodeError::kTruncated;
            if (bytes.size() > expected) return DecodeError::kTrailingBytes;
            FollowUp m;
            m.header = header;
            m.precise_origin_timestamp = get_u64(bytes, kHeaderLen);
            m.correction_ns = get_i64(bytes, kHeaderLen + 8);
            std::memcpy(m.link_hash.data(), bytes.data() + kHeaderLen + 16, crypto::kDigestLen);
            std::size_t at = kFollowUpSignedLen + 1;
            for (std::size_t i = 0; i < count; ++i) {
                TransparentClockBlock block;
                block.tc_id = get_u64(bytes, at);
                block.residence_ns = get_u64(bytes, at + 8);
                block.signature = get_bytes(bytes, at + 16, kSigLen);
                m.tc_blocks.push_back(std::move(block));
                at += kTcBlockLen;
            }
            m.signature = get_bytes(bytes, at, kSigLen);
            return Message{std::move(m)};
        }
        case MsgKind::kDelayReq: {
            if (bytes.size() < kDelayReqLen) return DecodeError::kTruncated;
            if (bytes.size() > kDelayReqLen) return DecodeError::kTrailingBytes;
            DelayReq m;
            m.header = header;
            m.t1 = get_u64(bytes, kHeaderLen);
            m.receiver_id = get_u64(bytes, kHeaderLen + 8);
            m.signature = get_bytes(bytes, kHeaderLen + 16, kSigLen);
            return Message{std::move(m)};
        }
        case MsgKind::kDelayResp: {
            if (bytes.size() < kDelayRespLen) return DecodeError::kTruncated;
            if (bytes.size() > kDelayRespLen) return DecodeError::kTrailingBytes;
            DelayResp m;
            m.header = header;
            m.t1_echo = get_u64(bytes, kHeaderLen);
            m.t2 = get_u64(bytes, kHeaderLen + 8);
            m.t3 = get_u64(bytes, kHeaderLen + 16);
            m.signature = get_bytes(bytes, kHeaderLen + 24, kSigLen);
            return Message{std::move(m)};
        }
        case MsgKind::kErrorResp: {
            if (bytes.size() < kErrorRespLen) return DecodeError::kTruncated;
            if (bytes.size() > kErrorRespLen) return DecodeError::kTrailingBytes;
            ErrorResp m;
            m.header = header;
            m.sender_timestamp = get_u64(bytes, kHeaderLen);
            m.reason = bytes[kHeaderLen + 8];
            m.signature = get_bytes(bytes, kHeaderLen + 9, kSigLen);
            return Message{std::move(m)};
        }
    }
    return DecodeError::kUnknownKind;
}

std::optional<BytesView> signed_portion(BytesView bytes, MsgKind kind) {
    switch (kind) {
        case MsgKind::kSessionAnnounce: return bytes.subspan(0, kHeaderLen + kPkLen);
        case MsgKind::kSync1Step: return bytes.subspan(0, kHeaderLen + 8);
        case MsgKind::kSync2Step: return std::nullopt;
        case MsgKind::kFollowUp: return bytes.subspan(0, kFollowUpSignedLen);
        case MsgKind::kDelayReq: return bytes.subspan(0, kHeaderLen + 16);
        case MsgKind::kDelayResp: return bytes.subspan(0, kHeaderLen + 24);
        case MsgKind::kErrorResp: return bytes.subspan(0, kHeaderLen + 9);
    }
    return std::nullopt;
}

Bytes tc_sign_input(BytesView followup_bytes, std::size_t existing_blocks, std::uint64_t tc_id,
                    std::uint64_t residence_ns) {
    Bytes input;
    input.reserve(kFollowUpSignedLen + existing_blocks * kTcBlockLen + 16);
    input.insert(input.end(), followup_bytes.data(), followup_bytes.data() + kFollowUpSignedLen);
    const std::size_t blocks_at = kFollowUpSignedLen + 1;
    for (std::size_t i = 0; i < existing_blocks * kTcBlockLen; ++i)
        input.push_back(followup_bytes[blocks_at + i]);
    put_u64(input, tc_id);
    put_u64(input, residence_ns);
    return input;
}

Bytes append_tc_block(BytesView followup_bytes, std::uint64_t tc_id, std::uint64_t residence_ns,
                      const crypto::KeyPair& tc_key) {
    if (followup_bytes.size() < kFollowUpBaseLen || followup_bytes[3] != static_cast<std::uint8_t>(MsgKind::kFollowUp))
        throw std::invalid_argument("append_tc_block: not an encoded FollowUp");
    const std::size_t count = followup_bytes[kFollowUpSignedLen];
    if (count == 255) throw std::invalid_argument("append_tc_block: block count exhausted");

    Bytes sig = crypto::sign(tc_key, tc_sign_input(followup_bytes, count, tc_id, residence_ns));

    Bytes out(followup_bytes.begin(), followup_bytes.end());
    out[kFollowUpSignedLen] = static_cast<std::uint8_t>(count + 1);
    Bytes block;
    put_u64(block, tc_id);
    put_u64(block, residence_ns);
    block.insert(block.end(), sig.begin(), sig.end());
    // New block goes after the existing ones, before the sender signature.
    out.insert(out.end() - static_cast<std::ptrdiff_t>(kSigLen), block.begin(), block.end());
    return out;
}

}  // namespace securetime::wire

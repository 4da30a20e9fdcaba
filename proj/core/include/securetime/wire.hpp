#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "securetime/bytes.hpp"
#include "securetime/crypto.hpp"

namespace securetime::wire {

// Canonical big-endian layout, fixed for cross-implementation signature
// verification. Every message starts with the 16-byte header:
//
//   magic 0x53 0x54 | version 0x01 | kind | session_key_id (8) | seq (u32)
//
// Signatures always cover a prefix of the encoded message; transparent-clock
// blocks on a FollowUp sit between the link hash block count and the sender
// signature so on-path devices can amend without the sender's key.

inline constexpr std::uint8_t kMagic0 = 0x53;
inline constexpr std::uint8_t kMagic1 = 0x54;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderLen = 16;
inline constexpr std::size_t kNonceLen = 16;
inline constexpr std::size_t kTcBlockLen = 8 + 8 + crypto::kSignatureLen;

// A session never reaches sequence-number wraparound: rotation is forced
// once the counter hits this threshold (2^32 - 2^16).
inline constexpr std::uint32_t kSeqRotationThreshold = 0xFFFF0000u;

// Authentication bytes carried beyond an unsigned layout: signature plus
// sequence number in 1-step mode; the 2-step pair adds the nonce, the link
// hash, one signature, and two sequence numbers.
inline constexpr std::int64_t kOneStepAuthOverheadBytes = crypto::kSignatureLen + 4;
inline constexpr std::int64_t kTwoStepAuthOverheadBytes =
    (4 + kNonceLen) + (4 + crypto::kDigestLen + crypto::kSignatureLen);

enum class MsgKind : std::uint8_t {
    kSessionAnnounce = 1,
    kSync1Step = 2,
    kSync2Step = 3,
    kFollowUp = 4,
    kDelayReq = 5,
    kDelayResp = 6,
    kErrorResp = 7,
};

std::string_view kind_name(MsgKind kind);

using Timestamp = std::uint64_t;  // nanoseconds since simulation epoch
using Nonce = std::array<std::uint8_t, kNonceLen>;

struct Header {
    crypto::KeyId session_key_id;
    std::uint32_t seq = 0;
    auto operator<=>(const Header&) const = default;
};

struct SessionAnnounce {
    Header header;  // seq = first sequence number of the new session
    crypto::PublicKey session_public_key;
    Bytes long_term_signature;
    auto operator<=>(const SessionAnnounce&) const = default;
};

struct Sync1Step {
    Header header;
    Timestamp origin_timestamp = 0;
    Bytes signature;  // session key
    auto operator<=>(const Sync1Step&) const = default;
};

// Unsigned marker message; carries only an unpredictable nonce. All clock
// effects are deferred to the signed FollowUp that hash-links it.
struct Sync2Step {
    Header header;
    Nonce nonce{};
    auto operator<=>(const Sync2Step&) const = default;
};

struct TransparentClockBlock {
    std::uint64_t tc_id = 0;
    std::uint64_t residence_ns = 0;
    Bytes signature;  // over sender-signed portion + prior blocks + this id/residence
    auto operator<=>(const TransparentClockBlock&) const = default;
};

struct FollowUp {
    Header header;  // seq = paired Sync2Step seq + 1
    Timestamp precise_origin_timestamp = 0;
    std::int64_t correction_ns = 0;
    crypto::Digest link_hash{};  // digest(sync bytes || session public key bytes)
    std::vector<TransparentClockBlock> tc_blocks;
    Bytes signature;  // session key; excludes tc blocks
    auto operator<=>(const FollowUp&) const = default;
};

struct DelayReq {
    Header header;  // seq = 0, session_key_id = requesting receiver's key id
    Timestamp t1 = 0;
    std::uint64_t receiver_id = 0;
    Bytes signature;  // receiver key
    auto operator<=>(const DelayReq&) const = default;
};

struct DelayResp {
    Header header;  // seq = sender's current next seq, key id = session key
    Timestamp t1_echo = 0;
    Timestamp t2 = 0;  // sender clock at request arrival
    Timestamp t3 = 0;  // sender clock at response send
    Bytes signature;   // session key
    auto operator<=>(const DelayResp&) const = default;
};

inline constexpr std::uint8_t kReasonSuspectedDelayAttack = 1;

struct ErrorResp {
    Header header;
    Timestamp sender_timestamp = 0;
    std::uint8_t reason = kReasonSuspectedDelayAttack;
    Bytes signature;  // session key
    auto operator<=>(const ErrorResp&) const = default;
};

using Message = std::variant<SessionAnnounce, Sync1Step, Sync2Step, FollowUp, DelayReq, DelayResp, ErrorResp>;

enum class DecodeError {
    kBadMagic,
    kBadVersion,
    kUnknownKind,
    kTruncated,
    kTrailingBytes,
    kFieldRange,
};

std::string_view decode_error_name(DecodeError err);

using DecodeResult = std::variant<Message, DecodeError>;

// Total over arbitrary bytes; never throws on malformed input.
DecodeResult decode(BytesView bytes);

Bytes encode(const Message& msg);
Bytes encode(const SessionAnnounce& msg);
Bytes encode(const Sync1Step& msg);
Bytes encode(const Sync2Step& msg);
Bytes encode(const FollowUp& msg);
Bytes encode(const DelayReq& msg);
Bytes encode(const DelayResp& msg);
Bytes encode(const ErrorResp& msg);

// Bytes covered by the sender/receiver signature, i.e. everything the
// signer committed to. Built from a message whose signature may be empty.
Bytes signing_input(const SessionAnnounce& msg);
Bytes signing_input(const Sync1Step& msg);
Bytes signing_input(const FollowUp& msg);
Bytes signing_input(const DelayReq& msg);
Bytes signing_input(const DelayResp& msg);
Bytes signing_input(const ErrorResp& msg);

MsgKind kind_of(const Message& msg);
std::uint32_t seq_of(const Message& msg);
crypto::KeyId key_id_of(const Message& msg);

// Prefix of an encoded message covered by its signature; nullopt for the
// unsigned Sync2Step. Bytes must decode successfully.
std::optional<BytesView> signed_portion(BytesView bytes, MsgKind kind);

// Transparent-clock amendment, applied directly to encoded FollowUp bytes.
// The new block is chained over the sender-signed portion and all prior
// blocks, so stripping or reordering is detectable by receivers that trust
// the transparent clock.
Bytes tc_sign_input(BytesView followup_bytes, std::size_t existing_blocks, std::uint64_t tc_id,
                    std::uint64_t residence_ns);
Bytes append_tc_block(BytesView followup_bytes, std::uint64_t tc_id, std::uint64_t residence_ns,
                      const crypto::KeyPair& tc_key);

}  // namespace securetime::wire

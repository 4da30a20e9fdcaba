#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>

#include "securetime/bytes.hpp"

namespace securetime::crypto {

inline constexpr std::size_t kSeedLen = 32;
inline constexpr std::size_t kDigestLen = 32;
inline constexpr std::size_t kKeyIdLen = 8;
inline constexpr std::size_t kSignatureLen = 64;
inline constexpr std::size_t kPublicKeyLen = 32;

using Digest = std::array<std::uint8_t, kDigestLen>;

// First 8 bytes of the digest of the public key. Collisions between any two
// keys of one run are a fatal configuration error, checked at wiring time.
struct KeyId {
    std::array<std::uint8_t, kKeyIdLen> bytes{};
    auto operator<=>(const KeyId&) const = default;
};

enum class SchemeId : std::uint8_t {
    kEd25519 = 0,  // reference scheme: 64 B signatures, 32 B public keys
    kHashTag = 1,  // insecure keyed-hash tag, for simulator-heavy tests
};

// Both built-in schemes share the 64 B / 32 B sizes the wire format fixes.
// Anything else can be plugged in behind this descriptor as long as it
// provides existential unforgeability and matching sizes.
struct SignatureScheme {
    SchemeId id;
    std::string_view name;
    std::size_t signature_len;
    std::size_t public_key_len;
};

const SignatureScheme& reference_scheme();
const SignatureScheme& test_scheme();
const SignatureScheme* find_scheme(std::string_view name);

// Raw key bytes; the governing scheme travels alongside in the code that
// uses it (the wire format carries bare 32-byte keys).
struct PublicKey {
    std::array<std::uint8_t, kPublicKeyLen> bytes{};
    auto operator<=>(const PublicKey&) const = default;
};

struct KeyPair {
    SchemeId scheme = SchemeId::kEd25519;
    Bytes secret;   // scheme-internal layout; the public half is derivable
    PublicKey pub;
    auto operator<=>(const KeyPair&) const = default;
};

// Deterministic: identical seeds yield identical keypairs.
KeyPair generate_keypair(const SignatureScheme& scheme, const std::array<std::uint8_t, kSeedLen>& seed);

Bytes sign(const KeyPair& key, BytesView message);

// Total over arbitrary input: malformed lengths reject, never abort.
bool verify(const SignatureScheme& scheme, const PublicKey& pub, BytesView message, BytesView signature);

// SHA-256.
Digest digest(BytesView message);

KeyId key_id_for(const PublicKey& pub);

}  // namespace securetime::crypto

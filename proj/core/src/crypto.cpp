#include "securetime/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace securetime::crypto {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialization failed");
    });
}

constexpr SignatureScheme kEd25519Scheme{SchemeId::kEd25519, "ed25519", kSignatureLen, kPublicKeyLen};
constexpr SignatureScheme kHashTagScheme{SchemeId::kHashTag, "hashtag-test", kSignatureLen, kPublicKeyLen};

// Test scheme: the "secret" is public (shared test key), the tag is a keyed
// BLAKE2b-512 over the message. Fast and deterministic; no security.
Bytes hashtag_tag(BytesView key, BytesView message) {
    Bytes tag(kSignatureLen);
    crypto_generichash(tag.data(), tag.size(), message.data(), message.size(), key.data(), key.size());
    return tag;
}

}  // namespace

const SignatureScheme& reference_scheme() { return kEd25519Scheme; }
const SignatureScheme& test_scheme() { return kHashTagScheme; }

const SignatureScheme* find_scheme(std::string_view name) {
    if (name == kEd25519Scheme.name) return &kEd25519Scheme;
    if (name == kHashTagScheme.name) return &kHashTagScheme;
    return nullptr;
}

KeyPair generate_keypair(const SignatureScheme& scheme, const std::array<std::uint8_t, kSeedLen>& seed) {
    ensure_sodium();
    KeyPair kp;
    kp.scheme = scheme.id;
    switch (scheme.id) {
        case SchemeId::kEd25519: {
            kp.secret.resize(crypto_sign_SECRETKEYBYTES);
            crypto_sign_seed_keypair(kp.pub.bytes.data(), kp.secret.data(), seed.data());
            return kp;
        }
        case SchemeId::kHashTag: {
            kp.secret.assign(seed.begin(), seed.end());
            std::memcpy(kp.pub.bytes.data(), seed.data(), kPublicKeyLen);
            return kp;
        }
    }
    throw std::invalid_argument("unsupported signature scheme");
}

Bytes sign(const KeyPair& key, BytesView message) {
    ensure_sodium();
    switch (key.scheme) {
        case SchemeId::kEd25519: {
            Bytes sig(crypto_sign_BYTES);
            unsigned long long len = 0;
            crypto_sign_detached(sig.data(), &len, message.data(), message.size(), key.secret.data());
            sig.resize(len);
            return sig;
        }
        case SchemeId::kHashTag:
            return hashtag_tag(key.secret, message);
    }
    throw std::invalid_argument("unsupported signature scheme");
}

bool verify(const SignatureScheme& scheme, const PublicKey& pub, BytesView message, BytesView signature) {
    ensure_sodium();
    if (signature.size() != scheme.signature_len) return false;
    switch (scheme.id) {
        case SchemeId::kEd25519:
            return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                               pub.bytes.data()) == 0;
        case SchemeId::kHashTag: {
            Bytes expected = hashtag_tag(BytesView(pub.bytes.data(), pub.bytes.size()), message);
            return sodium_memcmp(expected.data(), signature.data(), expected.size()) == 0;
        }
    }
    return false;
}

Digest digest(BytesView message) {
    ensure_sodium();
    Digest out{};
    crypto_hash_sha256(out.data(), message.data(), message.size());
    return out;
}

KeyId key_id_for(const PublicKey& pub) {
    Digest d = digest(BytesView(pub.bytes.data(), pub.bytes.size()));
    KeyId id;
    std::memcpy(id.bytes.data(), d.data(), kKeyIdLen);
    return id;
}

}  // namespace securetime::crypto

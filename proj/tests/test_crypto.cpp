#include <string>

#include "doctest.h"
#include "securetime/crypto.hpp"
#include "test_util.hpp"

using namespace securetime;
using securetime::testing::make_keys;
using securetime::testing::seed_from;

namespace {

Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST_CASE("keypair generation is deterministic per seed") {
    for (const auto* scheme : {&crypto::reference_scheme(), &crypto::test_scheme()}) {
        auto a = crypto::generate_keypair(*scheme, seed_from(1));
        auto b = crypto::generate_keypair(*scheme, seed_from(1));
        CHECK(a.pub == b.pub);
        CHECK(a.secret == b.secret);
        auto c = crypto::generate_keypair(*scheme, seed_from(2));
        CHECK(a.pub != c.pub);
    }
}

TEST_CASE("reference scheme matches the advertised sizes") {
    const auto& scheme = crypto::reference_scheme();
    CHECK(scheme.public_key_len == 32);
    CHECK(scheme.signature_len == 64);
    auto keys = make_keys(scheme, 3);
    Bytes sig = crypto::sign(keys, as_bytes("message"));
    CHECK(sig.size() == 64);
    // deterministic signatures
    CHECK(sig == crypto::sign(keys, as_bytes("message")));
}

TEST_CASE("sign/verify round trip and tamper rejection") {
    for (const auto* scheme : {&crypto::reference_scheme(), &crypto::test_scheme()}) {
        auto keys = make_keys(*scheme, 4);
        Bytes msg = as_bytes("the quick brown fox");
        Bytes sig = crypto::sign(keys, msg);
        CHECK(crypto::verify(*scheme, keys.pub, msg, sig));

        Bytes flipped = msg;
        flipped[3] ^= 0x01;
        CHECK_FALSE(crypto::verify(*scheme, keys.pub, flipped, sig));

        auto other = make_keys(*scheme, 5);
        CHECK_FALSE(crypto::verify(*scheme, other.pub, msg, sig));
    }
}

TEST_CASE("verify is total over malformed input") {
    const auto& scheme = crypto::reference_scheme();
    auto keys = make_keys(scheme, 6);
    Bytes msg = as_bytes("m");
    CHECK_FALSE(crypto::verify(scheme, keys.pub, msg, Bytes{}));
    CHECK_FALSE(crypto::verify(scheme, keys.pub, msg, Bytes(13, 0xab)));
    CHECK_FALSE(crypto::verify(scheme, keys.pub, Bytes{}, Bytes(64, 0)));
}

TEST_CASE("digest is the standard 256-bit hash") {
    // Published empty-input digest of SHA-256.
    crypto::Digest empty = crypto::digest(BytesView{});
    CHECK(to_hex(empty) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(crypto::digest(as_bytes("abc")) == crypto::digest(as_bytes("abc")));
    CHECK(crypto::digest(as_bytes("abc")) != crypto::digest(as_bytes("abd")));
}

TEST_CASE("key id is the first 8 bytes of the public key digest") {
    for (const auto* scheme : {&crypto::reference_scheme(), &crypto::test_scheme()}) {
        auto keys = make_keys(*scheme, 7);
        crypto::Digest full = crypto::digest(BytesView(keys.pub.bytes.data(), keys.pub.bytes.size()));
        crypto::KeyId id = crypto::key_id_for(keys.pub);
        CHECK(std::equal(id.bytes.begin(), id.bytes.end(), full.begin()));
    }
}

TEST_CASE("round trip holds over 1000 random seed/message pairs") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const auto& scheme = (i % 2 == 0) ? crypto::reference_scheme() : crypto::test_scheme();
        auto keys = crypto::generate_keypair(scheme, rng.next_seed32());
        Bytes msg;
        rng.fill(msg, 1 + rng.bounded(64));
        Bytes sig = crypto::sign(keys, msg);
        REQUIRE(crypto::verify(scheme, keys.pub, msg, sig));
    }
}

TEST_CASE("single-bit flips are rejected in 1000 random trials") {
    Rng rng(100);
    const auto& scheme = crypto::test_scheme();
    auto keys = make_keys(scheme, 8);
    int rejected = 0;
    for (int i = 0; i < 1000; ++i) {
        Bytes msg;
        rng.fill(msg, 32);
        Bytes sig = crypto::sign(keys, msg);
        if (rng.bounded(2) == 0) {
            std::uint64_t bit = rng.bounded(msg.size() * 8);
            msg[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        } else {
            std::uint64_t bit = rng.bounded(sig.size() * 8);
            sig[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        }
        if (!crypto::verify(scheme, keys.pub, msg, sig)) ++rejected;
    }
    CHECK(rejected == 1000);
}

TEST_CASE("unknown scheme names are rejected") {
    CHECK(crypto::find_scheme("ed25519") == &crypto::reference_scheme());
    CHECK(crypto::find_scheme("hashtag-test") == &crypto::test_scheme());
    CHECK(crypto::find_scheme("mqq-sig") == nullptr);
}

#include <benchmark/benchmark.h>

#include "securetime/crypto.hpp"
#include "securetime/rng.hpp"
#include "securetime/wire.hpp"

using namespace securetime;

namespace {

crypto::KeyPair keys_for(const crypto::SignatureScheme& scheme) {
    Rng rng(4242);
    return crypto::generate_keypair(scheme, rng.next_seed32());
}

Bytes signed_sync_bytes(const crypto::KeyPair& keys) {
    wire::Sync1Step msg;
    msg.header.session_key_id = crypto::key_id_for(keys.pub);
    msg.header.seq = 1;
    msg.origin_timestamp = 123'456'789;
    msg.signature = crypto::sign(keys, wire::signing_input(msg));
    return wire::encode(msg);
}

void BM_Sign(benchmark::State& state, const crypto::SignatureScheme& scheme) {
    crypto::KeyPair keys = keys_for(scheme);
    wire::Sync1Step msg;
    msg.header.session_key_id = crypto::key_id_for(keys.pub);
    Bytes input = wire::signing_input(msg);
    for (auto _ : state) {
        input[15] ^= 1;
        benchmark::DoNotOptimize(crypto::sign(keys, input));
    }
}

void BM_Verify(benchmark::State& state, const crypto::SignatureScheme& scheme) {
    crypto::KeyPair keys = keys_for(scheme);
    Bytes bytes = signed_sync_bytes(keys);
    auto portion = wire::signed_portion(bytes, wire::MsgKind::kSync1Step);
    auto decoded = std::get<wire::Message>(wire::decode(bytes));
    const Bytes& sig = std::get<wire::Sync1Step>(decoded).signature;
    for (auto _ : state)
        benchmark::DoNotOptimize(crypto::verify(scheme, keys.pub, *portion, sig));
}

void BM_Digest(benchmark::State& state) {
    Bytes input(static_cast<std::size_t>(state.range(0)), 0xA5);
    for (auto _ : state) benchmark::DoNotOptimize(crypto::digest(input));
}

void BM_EncodeDecodeSync(benchmark::State& state) {
    crypto::KeyPair keys = keys_for(crypto::test_scheme());
    Bytes bytes = signed_sync_bytes(keys);
    for (auto _ : state) benchmark::DoNotOptimize(wire::decode(bytes));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Sign, ed25519, crypto::reference_scheme());
BENCHMARK_CAPTURE(BM_Sign, hashtag_test, crypto::test_scheme());
BENCHMARK_CAPTURE(BM_Verify, ed25519, crypto::reference_scheme());
BENCHMARK_CAPTURE(BM_Verify, hashtag_test, crypto::test_scheme());
BENCHMARK(BM_Digest)->Arg(32)->Arg(129);
BENCHMARK(BM_EncodeDecodeSync);

BENCHMARK_MAIN();

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "securetime/clock.hpp"
#include "securetime/crypto.hpp"
#include "securetime/sender.hpp"
#include "securetime/wire.hpp"

namespace securetime {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AdversaryKind {
    kPassthrough,
    kBitflip,
    kReplay,
    kCrossSessionReplay,
    kOptimalDelay,
    kPreplayFlood,
    kRequestDrop,
};

std::string_view adversary_kind_name(AdversaryKind kind);

struct ReceiverSpec {
    std::int64_t drift_ppb = 0;
    std::int64_t initial_offset_ns = 0;
    bool compromised = false;  // grants this receiver's key to the adversary
};

struct TcSpec {
    std::int64_t residence_ns = 0;  // fixed residence
    std::int64_t residence_jitter_ns = 0;  // sampled uniformly on top when > 0
};

// One simulation run, fully specified. Parsed from a flat key=value file
// with ns/us/ms/s duration suffixes and a ppm suffix for drift rates.
struct Scenario {
    std::string name = "scenario";
    NetParams net{0, 1'000'000, 100'000};
    SyncMode mode = SyncMode::kOneStep;
    const crypto::SignatureScheme* scheme = &crypto::reference_scheme();
    std::vector<ReceiverSpec> receivers{ReceiverSpec{}};
    std::int64_t sync_interval_ns = 1'000'000'000;
    std::int64_t followup_gap_ns = 1'000'000;
    std::uint32_t announce_every_syncs = 64;
    TrueTime horizon_ns = 10'000'000'000;
    std::uint64_t seed = 1;

    AdversaryKind adversary = AdversaryKind::kPassthrough;
    std::size_t target_receiver = 0;
    bool adversary_detect = false;            // optimal-delay: force an alarm
    std::uint32_t detect_after_measurements = 3;
    std::uint64_t flood_per_interval = 64;    // pre-play injections per sync
    std::int64_t replay_lag_ns = 2'000'000'000;
    bool replay_announces = false;            // cross-session: also replay announces

    std::uint64_t nonce_space = 0;            // 0 = full 128-bit space
    std::size_t sync_buffer_capacity = 32;
    bool bootstrap_enabled = true;
    std::uint32_t rotation_threshold = wire::kSeqRotationThreshold;
    std::vector<TcSpec> tcs;
    bool receivers_trust_tcs = true;
    bool stop_on_alarm = false;
    std::optional<std::int64_t> constant_delay_ns;  // else uniform over the envelope

    void validate() const;
};

// "5ms" -> 5000000; plain integers are nanoseconds.
std::int64_t parse_duration_ns(std::string_view text);
// "100ppm" -> 100000 ppb; "250ppb" -> 250.
std::int64_t parse_rate_ppb(std::string_view text);

Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);

// Applies one "key=value" override on top of an existing scenario.
void apply_override(Scenario& scenario, std::string_view assignment);

}  // namespace securetime

#include "securetime/scenario.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace securetime {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::int64_t parse_int(std::string_view text, std::string_view what) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ScenarioError("invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
    return value;
}

std::uint64_t parse_uint(std::string_view text, std::string_view what) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ScenarioError("invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
    return value;
}

bool parse_bool(std::string_view text, std::string_view what) {
    if (text == "on" || text == "true" || text == "1" || text == "yes") return true;
    if (text == "off" || text == "false" || text == "0" || text == "no") return false;
    throw ScenarioError("invalid flag for " + std::string(what) + ": '" + std::string(text) + "'");
}

// Numeric prefix with an optional decimal point, scaled by the unit.
std::int64_t parse_scaled(std::string_view digits, std::int64_t scale, std::string_view original) {
    auto dot = digits.find('.');
    std::string_view whole = dot == std::string_view::npos ? digits : digits.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : digits.substr(dot + 1);
    bool negative = !whole.empty() && whole.front() == '-';
    if (negative) whole.remove_prefix(1);
    std::int64_t value = whole.empty() ? 0 : parse_int(whole, original);
    value *= scale;
    std::int64_t frac_scale = scale;
    for (char c : frac) {
        frac_scale /= 10;
        if (frac_scale == 0) throw ScenarioError("too many fractional digits in '" + std::string(original) + "'");
        if (c < '0' || c > '9') throw ScenarioError("invalid number '" + std::string(original) + "'");
        value += (c - '0') * frac_scale;
    }
    return negative ? -value : value;
}

}  // namespace

std::string_view adversary_kind_name(AdversaryKind kind) {
    switch (kind) {
        case AdversaryKind::kPassthrough: return "passthrough";
        case AdversaryKind::kBitflip: return "bitflip";
        case AdversaryKind::kReplay: return "replay";
        case AdversaryKind::kCrossSessionReplay: return "cross-session-replay";
        case AdversaryKind::kOptimalDelay: return "optimal-delay";
        case AdversaryKind::kPreplayFlood: return "preplay-flood";
        case AdversaryKind::kRequestDrop: return "request-drop";
    }
    return "unknown";
}

std::int64_t parse_duration_ns(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw ScenarioError("empty duration");
    if (text.ends_with("ns")) return parse_scaled(text.substr(0, text.size() - 2), 1, text);
    if (text.ends_with("us")) return parse_scaled(text.substr(0, text.size() - 2), 1'000, text);
    if (text.ends_with("ms")) return parse_scaled(text.substr(0, text.size() - 2), 1'000'000, text);
    if (text.ends_with("s")) return parse_scaled(text.substr(0, text.size() - 1), 1'000'000'000, text);
    return parse_int(text, "duration");
}

std::int64_t parse_rate_ppb(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw ScenarioError("empty rate");
    if (text.ends_with("ppm")) return parse_scaled(text.substr(0, text.size() - 3), 1'000, text);
    if (text.ends_with("ppb")) return parse_scaled(text.substr(0, text.size() - 3), 1, text);
    return parse_int(text, "rate");
}

namespace {

AdversaryKind parse_adversary(std::string_view text) {
    for (AdversaryKind kind :
         {AdversaryKind::kPassthrough, AdversaryKind::kBitflip, AdversaryKind::kReplay,
          AdversaryKind::kCrossSessionReplay, AdversaryKind::kOptimalDelay, AdversaryKind::kPreplayFlood,
          AdversaryKind::kRequestDrop})
        if (text == adversary_kind_name(kind)) return kind;
    throw ScenarioError("unknown adversary strategy '" + std::string(text) + "'");
}

// receiver.<index>.<field>
bool apply_receiver_key(Scenario& s, std::string_view key, std::string_view value) {
    if (!key.starts_with("receiver.")) return false;
    key.remove_prefix(9);
    auto dot = key.find('.');
    if (dot == std::string_view::npos) throw ScenarioError("receiver key needs an index and field");
    std::size_t index = static_cast<std::size_t>(parse_uint(key.substr(0, dot), "receiver index"));
    if (index >= s.receivers.size()) s.receivers.resize(index + 1);
    std::string_view field = key.substr(dot + 1);
    if (field == "drift")
        s.receivers[index].drift_ppb = parse_rate_ppb(value);
    else if (field == "offset")
        s.receivers[index].initial_offset_ns = parse_duration_ns(value);
    else if (field == "compromised")
        s.receivers[index].compromised = parse_bool(value, field);
    else
        throw ScenarioError("unknown receiver field '" + std::string(field) + "'");
    return true;
}

bool apply_tc_key(Scenario& s, std::string_view key, std::string_view value) {
    if (!key.starts_with("tc.")) return false;
    key.remove_prefix(3);
    auto dot = key.find('.');
    if (dot == std::string_view::npos) throw ScenarioError("tc key needs an index and field");
    std::size_t index = static_cast<std::size_t>(parse_uint(key.substr(0, dot), "tc index"));
    if (index >= s.tcs.size()) s.tcs.resize(index + 1);
    std::string_view field = key.substr(dot + 1);
    if (field == "residence")
        s.tcs[index].residence_ns = parse_duration_ns(value);
    else if (field == "jitter")
        s.tcs[index].residence_jitter_ns = parse_duration_ns(value);
    else
        throw ScenarioError("unknown tc field '" + std::string(field) + "'");
    return true;
}

void apply_key(Scenario& s, std::string_view key, std::string_view value) {
    if (key == "name") {
        s.name = std::string(value);
    } else if (key == "dmin") {
        s.net.min_delay_ns = parse_duration_ns(value);
    } else if (key == "dmax") {
        s.net.max_delay_ns = parse_duration_ns(value);
    } else if (key == "rho") {
        s.net.max_drift_ppb = parse_rate_ppb(value);
    } else if (key == "mode") {
        if (value == "1step")
            s.mode = SyncMode::kOneStep;
        else if (value == "2step")
            s.mode = SyncMode::kTwoStep;
        else
            throw ScenarioError("mode must be 1step or 2step");
    } else if (key == "scheme") {
        const crypto::SignatureScheme* scheme = crypto::find_scheme(value);
        if (scheme == nullptr) throw ScenarioError("unknown scheme '" + std::string(value) + "'");
        s.scheme = scheme;
    } else if (key == "receivers") {
        s.receivers.resize(static_cast<std::size_t>(parse_uint(value, key)));
    } else if (key == "sync_interval") {
        s.sync_interval_ns = parse_duration_ns(value);
    } else if (key == "followup_gap") {
        s.followup_gap_ns = parse_duration_ns(value);
    } else if (key == "announce_every") {
        s.announce_every_syncs = static_cast<std::uint32_t>(parse_uint(value, key));
    } else if (key == "horizon") {
        s.horizon_ns = static_cast<TrueTime>(parse_duration_ns(value));
    } else if (key == "seed") {
        s.seed = parse_uint(value, key);
    } else if (key == "adversary") {
        s.adversary = parse_adversary(value);
    } else if (key == "adversary.target") {
        s.target_receiver = static_cast<std::size_t>(parse_uint(value, key));
    } else if (key == "adversary.detect") {
        s.adversary_detect = parse_bool(value, key);
    } else if (key == "adversary.detect_after") {
        s.detect_after_measurements = static_cast<std::uint32_t>(parse_uint(value, key));
    } else if (key == "adversary.k") {
        s.flood_per_interval = parse_uint(value, key);
    } else if (key == "adversary.replay_lag") {
        s.replay_lag_ns = parse_duration_ns(value);
    } else if (key == "adversary.replay_announces") {
        s.replay_announces = parse_bool(value, key);
    } else if (key == "nonce_space") {
        s.nonce_space = parse_uint(value, key);
    } else if (key == "buffer") {
        s.sync_buffer_capacity = static_cast<std::size_t>(parse_uint(value, key));
    } else if (key == "bootstrap") {
        s.bootstrap_enabled = parse_bool(value, key);
    } else if (key == "rotation_threshold") {
        s.rotation_threshold = static_cast<std::uint32_t>(parse_uint(value, key));
    } else if (key == "trust_tc") {
        s.receivers_trust_tcs = parse_bool(value, key);
    } else if (key == "stop_on_alarm") {
        s.stop_on_alarm = parse_bool(value, key);
    } else if (key == "constant_delay") {
        s.constant_delay_ns = parse_duration_ns(value);
    } else if (!apply_receiver_key(s, key, value) && !apply_tc_key(s, key, value)) {
        throw ScenarioError("unknown scenario key '" + std::string(key) + "'");
    }
}

}  // namespace

void apply_override(Scenario& scenario, std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ScenarioError("expected key=value, got '" + std::string(assignment) + "'");
    apply_key(scenario, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

Scenario parse_scenario(std::string_view text) {
    Scenario s;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = nl == std::string_view::npos ? text : text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        try {
            apply_override(s, line);
        } catch (const ScenarioError& err) {
            throw ScenarioError("line " + std::to_string(line_no) + ": " + err.what());
        }
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

void Scenario::validate() const {
    try {
        net.validate();
    } catch (const std::invalid_argument& err) {
        throw ScenarioError(err.what());
    }
    if (receivers.empty()) throw ScenarioError("need at least one receiver");
    for (std::size_t i = 0; i < receivers.size(); ++i) {
        const auto& r = receivers[i];
        if (r.drift_ppb > net.max_drift_ppb || r.drift_ppb < -net.max_drift_ppb)
            throw ScenarioError("receiver " + std::to_string(i) + " drift exceeds the configured bound");
        if (r.initial_offset_ns > 5'000'000'000 || r.initial_offset_ns < -5'000'000'000)
            throw ScenarioError("receiver " + std::to_string(i) + " initial offset exceeds 5 s");
    }
    if (sync_interval_ns <= 0) throw ScenarioError("sync_interval must be positive");
    if (mode == SyncMode::kTwoStep && followup_gap_ns <= 0)
        throw ScenarioError("followup_gap must be positive in 2-step mode");
    if (horizon_ns == 0) throw ScenarioError("horizon must be positive");
    if (target_receiver >= receivers.size()) throw ScenarioError("adversary target receiver out of range");
    if (!tcs.empty() && mode != SyncMode::kTwoStep)
        throw ScenarioError("transparent clocks require 2-step mode");
    for (const auto& tc : tcs)
        if (tc.residence_ns < 0 || tc.residence_jitter_ns < 0)
            throw ScenarioError("tc residence must be non-negative");
    if (constant_delay_ns &&
        (*constant_delay_ns < net.min_delay_ns || *constant_delay_ns > net.max_delay_ns))
        throw ScenarioError("constant_delay outside the delay envelope");
    if (rotation_threshold < 4) throw ScenarioError("rotation_threshold too small");
    if (adversary == AdversaryKind::kOptimalDelay && receivers[target_receiver].drift_ppb != 0)
        throw ScenarioError("optimal-delay runs pin the target receiver drift to 0");
    if (adversary == AdversaryKind::kPreplayFlood && mode != SyncMode::kTwoStep)
        throw ScenarioError("preplay-flood requires 2-step mode");
    if (nonce_space == 1) throw ScenarioError("nonce_space must be 0 (full) or >= 2");
}

}  // namespace securetime

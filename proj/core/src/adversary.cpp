#include "securetime/adversary.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "securetime/analysis.hpp"
#include "securetime/scenario.hpp"
#include "securetime/wire.hpp"

namespace securetime {

namespace {

std::optional<wire::MsgKind> peek_kind(BytesView bytes) {
    if (bytes.size() < wire::kHeaderLen || bytes[0] != wire::kMagic0 || bytes[1] != wire::kMagic1)
        return std::nullopt;
    if (bytes[3] < 1 || bytes[3] > 7) return std::nullopt;
    return static_cast<wire::MsgKind>(bytes[3]);
}

std::vector<AdversaryAction> pass(const InFlight& msg) {
    return {ActDeliver{msg.link_delay_ns}};
}

class PassthroughStrategy final : public AdversaryStrategy {
  public:
    std::string_view name() const override { return "passthrough"; }
    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext&) override {
        return pass(msg);
    }
};

// Flips one random bit inside the signed portion of every signed
// time-carrying message; unsigned Sync2Step markers pass unchanged and
// announces pass so the receiver has a session to reject against.
class BitflipStrategy final : public AdversaryStrategy {
  public:
    std::string_view name() const override { return "bitflip"; }
    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext& ctx) override {
        auto kind = peek_kind(msg.bytes);
        if (!kind || *kind == wire::MsgKind::kSessionAnnounce || *kind == wire::MsgKind::kSync2Step)
            return pass(msg);
        auto portion = wire::signed_portion(msg.bytes, *kind);
        if (!portion) return pass(msg);
        Bytes mutated = msg.bytes;
        const std::uint64_t bit = ctx.rng.bounded(portion->size() * 8);
        mutated[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        return {ActModify{std::move(mutated), msg.link_delay_ns}};
    }
};

// Delivers the original and re-injects a verbatim copy after a lag.
class ReplayStrategy final : public AdversaryStrategy {
  public:
    explicit ReplayStrategy(std::int64_t lag_ns) : lag_ns_(lag_ns) {}
    std::string_view name() const override { return "replay"; }
    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext&) override {
        const std::uint64_t tag = next_tag_++;
        return {ActDeliver{msg.link_delay_ns}, ActStore{tag}, ActReplay{tag, msg.link_delay_ns + lag_ns_}};
    }

  private:
    std::int64_t lag_ns_;
    std::uint64_t next_tag_ = 1;
};

// Captures the first session's multicast traffic and replays all of it
// verbatim once the sender rotates to a new session key.
class CrossSessionReplayStrategy final : public AdversaryStrategy {
  public:
    CrossSessionReplayStrategy(std::int64_t spacing_ns, bool replay_announces)
        : spacing_ns_(spacing_ns), replay_announces_(replay_announces) {}
    std::string_view name() const override { return "cross-session-replay"; }

    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext&) override {
        auto kind = peek_kind(msg.bytes);
        if (!kind) return pass(msg);

        if (*kind == wire::MsgKind::kSessionAnnounce) {
            crypto::KeyId key_id;
            std::copy_n(msg.bytes.begin() + 4, crypto::kKeyIdLen, key_id.bytes.begin());
            if (!first_session_key_) {
                first_session_key_ = key_id;
            } else if (key_id != *first_session_key_ && !replayed_) {
                replayed_ = true;
                std::vector<AdversaryAction> actions = pass(msg);
                std::int64_t stagger = msg.link_delay_ns;
                for (const InFlight& stored : captured_) {
                    stagger += spacing_ns_;
                    actions.push_back(ActInject{stored.bytes, stored.to, stagger});
                }
                return actions;
            }
            if (replay_announces_ && first_session_key_ && key_id == *first_session_key_)
                capture(msg);
            return pass(msg);
        }

        const bool multicast_kind = *kind == wire::MsgKind::kSync1Step ||
                                    *kind == wire::MsgKind::kSync2Step ||
                                    *kind == wire::MsgKind::kFollowUp;
        if (multicast_kind && !replayed_ && in_first_session(msg)) capture(msg);
        return pass(msg);
    }

  private:
    bool in_first_session(const InFlight& msg) const {
        if (!first_session_key_) return false;
        crypto::KeyId key_id;
        std::copy_n(msg.bytes.begin() + 4, crypto::kKeyIdLen, key_id.bytes.begin());
        return key_id == *first_session_key_;
    }
    void capture(const InFlight& msg) { captured_.push_back(msg); }

    std::int64_t spacing_ns_;
    bool replay_announces_;
    std::optional<crypto::KeyId> first_session_key_;
    std::vector<InFlight> captured_;
    bool replayed_ = false;
};

class RequestDropStrategy final : public AdversaryStrategy {
  public:
    std::string_view name() const override { return "request-drop"; }
    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext&) override {
        if (auto kind = peek_kind(msg.bytes); kind && *kind == wire::MsgKind::kDelayReq) return {ActDrop{}};
        return pass(msg);
    }
};

// Worst-case delay attacker with ground-truth access. Holds the target's
// offset at the largest value that still passes every delay-measurement
// check, and rides the correction-budget excursion between measurements:
// push down for half the interval, revert before the next measurement. In
// detection mode it stops reverting after a configured number of clean
// measurements and drops the next request, forcing the timeout alarm while
// capped below the detection bound.
class OptimalDelayStrategy final : public AdversaryStrategy {
  public:
    OptimalDelayStrategy(const Scenario& scenario)
        : target_(scenario.target_receiver),
          detect_(scenario.adversary_detect),
          detect_after_(scenario.detect_after_measurements),
          net_(scenario.net) {
        const BoundsSet bounds = compute_bounds(net_);
        hold_ = std::min(bounds.eps_m_ns, net_.max_delay_ns);
        margin_ = 2 * scale_ppb(scenario.sync_interval_ns, net_.max_drift_ppb) + 1'000;
        push_ = std::max<std::int64_t>(0, bounds.eps_m_ns / 2 - margin_);
        cap_ = hold_ + bounds.eps_m_ns + scale_ppb(2 * net_.max_delay_ns, net_.max_drift_ppb);
    }

    std::string_view name() const override { return "optimal-delay"; }

    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext& ctx) override {
        auto kind = peek_kind(msg.bytes);
        if (!kind) return pass(msg);
        if (msg.to != static_cast<std::int32_t>(target_) && msg.from != static_cast<std::int32_t>(target_))
            return pass(msg);

        switch (*kind) {
            case wire::MsgKind::kSync1Step:
            case wire::MsgKind::kSync2Step:
                return steer_sync(msg, ctx);
            case wire::MsgKind::kFollowUp: {
                // Keep the pair ordered: the FollowUp lands right after the
                // sync it references.
                const std::uint32_t seq = get_u32(msg.bytes, 12);
                auto chosen = sync_delay_by_seq_.find(seq - 1);
                if (chosen == sync_delay_by_seq_.end()) return pass(msg);
                const TrueTime sync_arrival = chosen->second;
                sync_delay_by_seq_.erase(chosen);
                std::int64_t delay = static_cast<std::int64_t>(sync_arrival) + 1 -
                                     static_cast<std::int64_t>(msg.injected_at);
                if (delay < 0) delay = 0;
                return {ActDeliver{delay}};
            }
            case wire::MsgKind::kDelayReq: {
                measurements_seen_ += 1;
                if (detect_ && measurements_seen_ > detect_after_) return {ActDrop{}};
                const std::int64_t offset = ctx.sim.receiver_probe(target_).true_offset_ns;
                const std::int64_t transit = std::max<std::int64_t>(0, net_.min_delay_ns + offset);
                return {ActDeliver{transit}};
            }
            case wire::MsgKind::kDelayResp: {
                const ReceiverProbe probe = ctx.sim.receiver_probe(target_);
                const std::int64_t transit = net_.min_delay_ns - probe.true_offset_ns;
                plan_measurement(msg, probe, transit);
                return {ActDeliver{transit}};
            }
            default:
                return pass(msg);
        }
    }

  private:
    struct PlannedMeasurement {
        TrueTime completes_at = 0;
        LocalTime t4_local = 0;
        std::int64_t path_delay = 0;
    };

    void plan_measurement(const InFlight& msg, const ReceiverProbe& probe, std::int64_t transit) {
        auto decoded = wire::decode(msg.bytes);
        if (!std::holds_alternative<wire::Message>(decoded)) return;
        const auto& resp = std::get<wire::DelayResp>(std::get<wire::Message>(decoded));
        PlannedMeasurement plan;
        plan.completes_at = msg.injected_at + static_cast<TrueTime>(transit);
        plan.t4_local = static_cast<LocalTime>(static_cast<std::int64_t>(plan.completes_at) +
                                               probe.true_offset_ns);
        const std::int64_t request_leg = static_cast<std::int64_t>(resp.t2) - static_cast<std::int64_t>(resp.t1_echo);
        const std::int64_t reply_leg = static_cast<std::int64_t>(plan.t4_local) - static_cast<std::int64_t>(resp.t3);
        plan.path_delay = std::clamp((request_leg + reply_leg) / 2, net_.min_delay_ns, net_.max_delay_ns);
        planned_ = plan;
    }

    std::vector<AdversaryAction> steer_sync(const InFlight& msg, AdversaryContext& ctx) {
        const ReceiverProbe probe = ctx.sim.receiver_probe(target_);
        const std::int64_t offset = probe.true_offset_ns;

        // State the receiver will hold when this sync lands: a measurement
        // completing first updates the path-delay estimate and t_last.
        std::int64_t path_delay = probe.path_delay_ns;
        LocalTime t_last = probe.t_last;
        LocalTime window_end = probe.next_measurement_due;
        TrueTime not_before = msg.injected_at;
        if (planned_ && msg.injected_at <= planned_->completes_at) {
            not_before = planned_->completes_at + 1;
            path_delay = planned_->path_delay;
            t_last = planned_->t4_local;
            window_end = planned_->t4_local + static_cast<LocalTime>(probe.measurement_interval_ns);
        }

        const std::int64_t target_offset = plan_target(probe, window_end);
        std::int64_t step = target_offset - offset;

        // Solve the delivery delay so the receiver's clamped correction
        // lands exactly on the step; the clamp limit depends on the arrival
        // this delay produces, so iterate the pair to a fixed point.
        std::int64_t delay = 0;
        for (int round = 0; round < 6; ++round) {
            delay = path_delay - offset - step;
            if (delay < 0) delay = 0;
            TrueTime arrival = msg.injected_at + static_cast<TrueTime>(delay);
            if (arrival < not_before) {
                arrival = not_before;
                delay = static_cast<std::int64_t>(arrival - msg.injected_at);
            }
            LocalTime arrival_local = static_cast<LocalTime>(static_cast<std::int64_t>(arrival) + offset);
            if (arrival_local <= t_last) {
                delay += static_cast<std::int64_t>(t_last - arrival_local) + 1;
                arrival_local = t_last + 1;
            }
            const std::int64_t limit =
                scale_ppb(static_cast<std::int64_t>(arrival_local - t_last), net_.max_drift_ppb);
            const std::int64_t clamped = std::clamp(step, -limit, limit);
            if (clamped == step) break;
            step = clamped;
        }

        if (msg.bytes[3] == static_cast<std::uint8_t>(wire::MsgKind::kSync2Step))
            sync_delay_by_seq_[get_u32(msg.bytes, 12)] = msg.injected_at + static_cast<TrueTime>(delay);
        return {ActDeliver{delay}};
    }

    std::int64_t plan_target(const ReceiverProbe& probe, LocalTime window_end) const {
        if (detect_ && measurements_seen_ >= detect_after_) return -cap_;
        const LocalTime half = static_cast<LocalTime>(probe.measurement_interval_ns / 2);
        const LocalTime mid = window_end > half ? window_end - half : 0;
        const bool push_phase = probe.local_now < mid;
        return push_phase ? -(hold_ + push_) : -hold_;
    }

    std::size_t target_;
    bool detect_;
    std::uint32_t detect_after_;
    NetParams net_;
    std::int64_t hold_ = 0;
    std::int64_t push_ = 0;
    std::int64_t margin_ = 0;
    std::int64_t cap_ = 0;
    std::uint32_t measurements_seen_ = 0;
    std::optional<PlannedMeasurement> planned_;
    std::map<std::uint32_t, TrueTime> sync_delay_by_seq_;  // chosen sync arrival times
};

// Pre-play flooder: drops each honest Sync2Step and injects k forgeries
// carrying guessed nonces at the same sequence number, hoping one matches
// the honest FollowUp's link hash. Guesses never use the current honest
// nonce, only the history of spent ones.
class PreplayFloodStrategy final : public AdversaryStrategy {
  public:
    PreplayFloodStrategy(std::uint64_t per_interval, std::size_t target)
        : per_interval_(per_interval), target_(target) {}
    std::string_view name() const override { return "preplay-flood"; }

    std::vector<AdversaryAction> on_message(const InFlight& msg, AdversaryContext& ctx) override {
        auto kind = peek_kind(msg.bytes);
        if (!kind || *kind != wire::MsgKind::kSync2Step || msg.from != kSenderNode ||
            msg.to != static_cast<std::int32_t>(target_))
            return pass(msg);

        std::vector<AdversaryAction> actions{ActDrop{}};
        if (ctx.nonce_space != 0) {
            std::uint64_t guess = 0;
            for (std::uint64_t i = 0; i < per_interval_; ++i) {
                while (used_.contains(guess)) ++guess;
                if (guess >= ctx.nonce_space) break;
                actions.push_back(ActInject{forge_with_nonce(msg.bytes, guess), msg.to, 0});
                ++guess;
            }
            used_.insert(honest_nonce_value(msg.bytes));
        } else {
            for (std::uint64_t i = 0; i < per_interval_; ++i) {
                Bytes forged = msg.bytes;
                Bytes random_nonce;
                ctx.rng.fill(random_nonce, wire::kNonceLen);
                std::copy(random_nonce.begin(), random_nonce.end(),
                          forged.begin() + wire::kHeaderLen);
                actions.push_back(ActInject{std::move(forged), msg.to, 0});
            }
        }
        return actions;
    }

  private:
    static std::uint64_t honest_nonce_value(BytesView bytes) {
        return get_u64(bytes, wire::kHeaderLen + 8);
    }
    static Bytes forge_with_nonce(BytesView bytes, std::uint64_t value) {
        Bytes forged(bytes.begin(), bytes.end());
        for (std::size_t i = 0; i < 8; ++i) forged[wire::kHeaderLen + i] = 0;
        for (int i = 0; i < 8; ++i)
            forged[wire::kHeaderLen + 8 + static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(value >> (56 - 8 * i));
        return forged;
    }

    std::uint64_t per_interval_;
    std::size_t target_;
    std::set<std::uint64_t> used_;
};

}  // namespace

std::unique_ptr<AdversaryStrategy> make_strategy(const Scenario& scenario) {
    switch (scenario.adversary) {
        case AdversaryKind::kPassthrough: return std::make_unique<PassthroughStrategy>();
        case AdversaryKind::kBitflip: return std::make_unique<BitflipStrategy>();
        case AdversaryKind::kReplay: return std::make_unique<ReplayStrategy>(scenario.replay_lag_ns);
        case AdversaryKind::kCrossSessionReplay:
            return std::make_unique<CrossSessionReplayStrategy>(scenario.sync_interval_ns / 4,
                                                                scenario.replay_announces);
        case AdversaryKind::kOptimalDelay: return std::make_unique<OptimalDelayStrategy>(scenario);
        case AdversaryKind::kPreplayFlood:
            return std::make_unique<PreplayFloodStrategy>(scenario.flood_per_interval,
                                                          scenario.target_receiver);
        case AdversaryKind::kRequestDrop: return std::make_unique<RequestDropStrategy>();
    }
    throw ScenarioError("unknown adversary strategy");
}

}  // namespace securetime

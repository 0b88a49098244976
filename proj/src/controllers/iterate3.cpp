#include "rclab/controllers/iterate3.hpp"

#include <algorithm>

#include "rclab/util/bytes.hpp"

namespace rclab::controllers {

namespace {

std::uint8_t clamp_index(std::uint8_t v, std::uint8_t count) { return v >= count ? count - 1 : v; }

std::uint8_t inc_sat(std::uint8_t v) { return static_cast<std::uint8_t>(std::min(v + 1, 255)); }

}  // namespace

std::array<std::byte, AlgoState::kSize> AlgoState::encode() const
{
    std::array<std::byte, kSize> out{};
    ByteWriter w(out);
    w.put(current_mcs);
    w.put(last_good_mcs);
    w.put(recent_ok);
    w.put(promote_streak);
    w.put(mcs5_cooldown);
    w.put(outage_guard);
    w.put(low_ok_streak);
    w.put(pad);
    w.put(frame_count);
    return out;
}

AlgoState AlgoState::decode(std::span<const std::byte> bytes)
{
    require_size(bytes, kSize, "AlgoState");
    ByteReader r(bytes);
    AlgoState s;
    s.current_mcs = r.get<std::uint8_t>();
    s.last_good_mcs = r.get<std::uint8_t>();
    s.recent_ok = r.get<std::uint8_t>();
    s.promote_streak = r.get<std::uint8_t>();
    s.mcs5_cooldown = r.get<std::uint8_t>();
    s.outage_guard = r.get<std::uint8_t>();
    s.low_ok_streak = r.get<std::uint8_t>();
    s.pad = r.get<std::uint8_t>();
    s.frame_count = r.get<std::uint32_t>();
    return s;
}

AlgoState initial_algo_state(const IterateParams& params)
{
    AlgoState s;
    if (params.prime_low_ok_streak) {
        s.low_ok_streak = params.outage_exit_streak_req;
    }
    return s;
}

Iterate3Result iterate3_step(const AlgoState& state, const TxStatusContext& ctx, const IterateParams& p)
{
    const auto wcid = static_cast<std::uint32_t>(ctx.wcid);
    if (wcid == 0 || wcid >= kMaxStations) {
        return {state, std::nullopt};
    }
    const std::uint64_t success = ctx.success;
    const std::uint64_t retry_count = ctx.retry_count;

    const std::uint8_t cur = clamp_index(state.current_mcs, p.mcs_count);
    (void)cur;  // read but unused by the decision logic
    std::uint8_t last_good = clamp_index(state.last_good_mcs, p.mcs_count);
    const std::uint8_t used = clamp_index(static_cast<std::uint8_t>(ctx.mcs_used), p.mcs_count);

    std::uint8_t recent_ok = state.recent_ok;
    std::uint8_t promote_streak = state.promote_streak;
    std::uint8_t mcs5_cooldown = state.mcs5_cooldown;
    std::uint8_t outage_guard = state.outage_guard;
    std::uint8_t low_ok_streak = state.low_ok_streak;
    const std::uint32_t frames = state.frame_count + 1;
    std::uint8_t chosen = p.default_mcs;

    if (success) {
        recent_ok = 1;
        if (used >= p.default_last_good && retry_count <= 1) {
            last_good = used;
        }
        chosen = std::max(last_good, p.default_mcs);
        if (chosen > 5) {
            chosen = 5;
        }

        if (chosen == p.default_mcs) {
            promote_streak = retry_count == 0 ? inc_sat(promote_streak) : 0;
            if (mcs5_cooldown > 0 && retry_count == 0) {
                --mcs5_cooldown;
            }
            if (mcs5_cooldown == 0 && promote_streak >= p.promote_streak_req) {
                chosen = 5;
            }
        } else {
            if (retry_count > 0) {
                promote_streak = 0;
            }
            if (used >= 5 && retry_count >= 1) {
                mcs5_cooldown = p.mid_cooldown_reduce;
            }
        }
    } else {
        recent_ok = 0;
        promote_streak = 0;
        chosen = last_good;
        if (used >= 5) {
            chosen = p.default_mcs;
            mcs5_cooldown = p.mcs5_cooldown_init;
        } else if (used > 0 && used <= chosen) {
            chosen = used - 1;
        }
        chosen = std::max(chosen, p.default_last_good);
    }

    // High-retry override.
    if (retry_count >= p.very_high_retry) {
        chosen = p.default_last_good;
        promote_streak = 0;
    } else if (retry_count >= p.high_retry_thresh && chosen > p.default_mcs) {
        chosen = p.default_mcs;
        promote_streak = 0;
    }

    // Near-outage guard.
    if (used >= p.default_mcs && (!success || retry_count >= p.very_high_retry)) {
        outage_guard = p.outage_guard_init;
        low_ok_streak = 0;
    } else if (outage_guard > 0 && success && used <= p.default_last_good && retry_count == 0) {
        low_ok_streak = inc_sat(low_ok_streak);
        --outage_guard;
    } else if (!success || retry_count > 0) {
        low_ok_streak = 0;
    }

    // Periodic re-probe on sustained failure.
    if ((frames & p.retest_period_mask) == 0 && !recent_ok) {
        chosen = last_good;
    }

    if (mcs5_cooldown > 0 && chosen >= 5) {
        chosen = p.default_mcs;
    }
    if (outage_guard > 0) {
        chosen = p.default_last_good;
        promote_streak = 0;
    } else if (low_ok_streak < p.outage_exit_streak_req && chosen > p.default_last_good) {
        chosen = p.default_last_good;
    }

    chosen = std::max(chosen, p.default_last_good);  // absolute floor

    AlgoState next = state;
    next.frame_count = frames;
    next.current_mcs = chosen;
    next.last_good_mcs = last_good;
    next.recent_ok = recent_ok;
    next.promote_streak = promote_streak;
    next.mcs5_cooldown = mcs5_cooldown;
    next.outage_guard = outage_guard;
    next.low_ok_streak = low_ok_streak;
    return {next, chosen};
}

void Iterate3Controller::on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine)
{
    if (!valid_wcid(static_cast<std::uint32_t>(ctx.wcid))) {
        return;
    }
    const auto wcid = static_cast<std::uint8_t>(ctx.wcid);
    const Bytes raw = engine.read_algo(wcid);
    if (raw.size() != AlgoState::kSize) {
        return;  // algorithm map belongs to another program layout
    }
    AlgoState state = AlgoState::decode(raw);
    if (state == AlgoState{}) {
        state = initial_algo_state(params_);
    }
    const Iterate3Result r = iterate3_step(state, ctx, params_);
    const auto bytes = r.state.encode();
    engine.write_algo(wcid, bytes);
    if (r.chosen) {
        engine.write_rate_map(wcid, RateMapEntry::from_rate(RateSpec::ht(*r.chosen)));
    }
}

}  // namespace rclab::controllers

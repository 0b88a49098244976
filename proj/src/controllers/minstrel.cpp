#include "rclab/controllers/minstrel.hpp"

#include <algorithm>

#include "rclab/util/rng.hpp"

namespace rclab::controllers {

namespace {

std::uint64_t xorshift(std::uint64_t& s)
{
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
}

}  // namespace

MinstrelState initial_minstrel_state(const MinstrelParams& params)
{
    MinstrelState s;
    s.sample_countdown = params.sample_every;
    s.sampler = mix_seed(params.seed, 0) | 1;  // xorshift state must be nonzero
    return s;
}

std::uint8_t minstrel_best(const std::array<double, phy::kMcsCount>& probs)
{
    std::uint8_t best = 0;
    double best_tp = -1.0;
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) {
        const double tp = static_cast<double>(phy::phy_rate_kbps(phy::RateSpec::ht(m))) * probs[m];
        if (tp > best_tp) {
            best_tp = tp;
            best = m;
        }
    }
    return best;
}

MinstrelResult minstrel_step(const MinstrelState& state, const TxStatusContext& ctx, const MinstrelParams& p)
{
    MinstrelResult r{state, state.current_best, false};
    MinstrelState& s = r.state;

    const auto used = static_cast<std::uint8_t>(std::min<std::uint64_t>(ctx.mcs_used, phy::kMcsCount - 1));
    // Only a delivery at the configured HT rate is credited to it; frames
    // rescued by firmware fallback count as failed attempts.
    const bool delivered_at_used = ctx.success != 0 && ctx.hw_mcs_used == used && ctx.hw_rate_flags == phy::kFlagHt;
    const auto attempts_cap = static_cast<std::uint64_t>(p.retry_limit) + 1;
    s.window_attempts[used] += static_cast<std::uint32_t>(std::min(ctx.retry_count + 1, attempts_cap));
    s.window_successes[used] += delivered_at_used ? 1 : 0;

    if (++s.frames_since_update >= p.update_interval) {
        for (std::size_t m = 0; m < phy::kMcsCount; ++m) {
            if (s.window_attempts[m] == 0) {
                continue;
            }
            const double ratio = static_cast<double>(s.window_successes[m]) / s.window_attempts[m];
            s.ewma_prob[m] = s.has_estimate[m] ? (1.0 - p.ewma_alpha) * s.ewma_prob[m] + p.ewma_alpha * ratio : ratio;
            s.has_estimate[m] = true;
            s.window_attempts[m] = 0;
            s.window_successes[m] = 0;
        }
        s.frames_since_update = 0;
        s.current_best = minstrel_best(s.ewma_prob);
    }

    r.chosen = s.current_best;
    if (s.sample_countdown <= 1) {
        s.sample_countdown = p.sample_every;
        // Uniform over the seven non-best indices.
        const auto pick = static_cast<std::uint8_t>(xorshift(s.sampler) % (phy::kMcsCount - 1));
        r.chosen = pick >= s.current_best ? pick + 1 : pick;
        r.sampled = true;
    } else {
        --s.sample_countdown;
    }
    return r;
}

MinstrelController::MinstrelController(MinstrelParams params) : params_(params)
{
    states_.fill(initial_minstrel_state(params_));
    for (std::size_t w = 0; w < states_.size(); ++w) {
        states_[w].sampler = mix_seed(params_.seed, w) | 1;
    }
}

void MinstrelController::on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine)
{
    if (!valid_wcid(ctx.wcid)) {
        return;
    }
    const auto wcid = static_cast<std::uint8_t>(ctx.wcid);
    MinstrelResult r = minstrel_step(states_[wcid], ctx, params_);
    states_[wcid] = r.state;
    sampled_ += r.sampled ? 1 : 0;
    engine.write_rate_map(wcid, RateMapEntry::from_rate(phy::RateSpec::ht(r.chosen)));
}

}  // namespace rclab::controllers

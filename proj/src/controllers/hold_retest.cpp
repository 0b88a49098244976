#include "rclab/controllers/hold_retest.hpp"

#include <algorithm>
#include <stdexcept>

namespace rclab::controllers {

HoldRetestResult hold_retest_step(const HoldRetestState& state, const TxStatusContext& ctx, std::uint8_t held,
                                  std::uint32_t retest_mask)
{
    if (held >= phy::kMcsCount) {
        throw std::invalid_argument("held MCS out of range");
    }
    HoldRetestResult r{state, held};
    HoldRetestState& s = r.state;
    if (s.probe_outstanding) {
        // This completion reports the probe frame; either way we fall back to held.
        ++s.probes;
        if (ctx.success == 0 || ctx.hw_mcs_used != ctx.mcs_used) {
            ++s.probe_failures;
        }
        s.probe_outstanding = false;
    }
    s.frame_count += 1;
    if ((s.frame_count & retest_mask) == 0) {
        r.chosen = std::min<std::uint8_t>(held + 1, phy::kMcsCount - 1);
        s.probe_outstanding = true;
    }
    return r;
}

HoldRetestController::HoldRetestController(std::uint8_t held, std::uint32_t retest_mask)
    : held_(held), retest_mask_(retest_mask)
{
    if (held >= phy::kMcsCount) {
        throw std::invalid_argument("held MCS out of range");
    }
}

void HoldRetestController::on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine)
{
    if (!valid_wcid(ctx.wcid)) {
        return;
    }
    const auto wcid = static_cast<std::uint8_t>(ctx.wcid);
    HoldRetestResult r = hold_retest_step(states_[wcid], ctx, held_, retest_mask_);
    states_[wcid] = r.state;
    engine.write_rate_map(wcid, RateMapEntry::from_rate(phy::RateSpec::ht(r.chosen)));
}

}  // namespace rclab::controllers

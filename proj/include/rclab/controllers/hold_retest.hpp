#pragma once

#include <cstdint>

#include "rclab/engine/policy_engine.hpp"

namespace rclab::controllers {

/// Holds one MCS and probes the next one up on a fixed frame cadence. Probes
/// never promote the held rate.
struct HoldRetestState {
    std::uint32_t frame_count = 0;
    std::uint32_t probes = 0;
    std::uint32_t probe_failures = 0;
    bool probe_outstanding = false;

    friend bool operator==(const HoldRetestState&, const HoldRetestState&) = default;
};

struct HoldRetestResult {
    HoldRetestState state;
    std::uint8_t chosen = 0;
};

/// Probes held + 1 (clamped to MCS 7) whenever (frame_count & retest_mask) == 0.
HoldRetestResult hold_retest_step(const HoldRetestState& state, const TxStatusContext& ctx, std::uint8_t held,
                                  std::uint32_t retest_mask);

class HoldRetestController final : public RateController {
public:
    HoldRetestController(std::uint8_t held = 4, std::uint32_t retest_mask = 16383);

    std::string_view name() const override { return "hold-retest"; }
    std::size_t state_size() const override { return 0; }
    void on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine) override;

    const HoldRetestState& station_state(std::uint8_t wcid) const { return states_.at(wcid); }

private:
    std::uint8_t held_;
    std::uint32_t retest_mask_;
    std::array<HoldRetestState, kMaxStations> states_{};
};

}  // namespace rclab::controllers

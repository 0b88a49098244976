#pragma once

#include <array>
#include <cstdint>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/phy/channel.hpp"

namespace rclab::controllers {

struct MinstrelParams {
    std::uint32_t update_interval = 100;  // frames per statistics window
    double ewma_alpha = 0.25;              // weight of the newest window
    std::uint32_t sample_every = 10;       // one sampling frame in ten
    /// Attempts the radio makes at the configured rate before falling back;
    /// used to account failed frames as attempts.
    std::uint32_t retry_limit = phy::kDefaultRetryLimit;
    std::uint64_t seed = 0x5EED;
};

/// EWMA-of-success-probability controller that picks the rate maximizing
/// phy_rate x success probability and spends a fixed share of frames
/// sampling other rates.
struct MinstrelState {
    std::array<double, phy::kMcsCount> ewma_prob{};
    std::array<bool, phy::kMcsCount> has_estimate{};
    std::array<std::uint32_t, phy::kMcsCount> window_attempts{};
    std::array<std::uint32_t, phy::kMcsCount> window_successes{};
    std::uint32_t frames_since_update = 0;
    std::uint32_t sample_countdown = 0;
    std::uint8_t current_best = 0;
    std::uint64_t sampler = 0;  // xorshift state for sample selection

    friend bool operator==(const MinstrelState&, const MinstrelState&) = default;
};

MinstrelState initial_minstrel_state(const MinstrelParams& params = {});

/// Index maximizing phy_rate(HT20, long GI) x prob; ties go to the lower MCS.
std::uint8_t minstrel_best(const std::array<double, phy::kMcsCount>& probs);

struct MinstrelResult {
    MinstrelState state;
    std::uint8_t chosen = 0;
    bool sampled = false;
};

MinstrelResult minstrel_step(const MinstrelState& state, const TxStatusContext& ctx, const MinstrelParams& params = {});

class MinstrelController final : public RateController {
public:
    explicit MinstrelController(MinstrelParams params = {});

    std::string_view name() const override { return "minstrel"; }
    std::size_t state_size() const override { return 0; }
    void on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine) override;

    const MinstrelState& station_state(std::uint8_t wcid) const { return states_.at(wcid); }
    std::uint64_t sampled_frames() const { return sampled_; }

private:
    MinstrelParams params_;
    std::array<MinstrelState, kMaxStations> states_;
    std::uint64_t sampled_ = 0;
};

}  // namespace rclab::controllers

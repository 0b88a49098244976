#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/engine/records.hpp"

namespace rclab::controllers {

/// Tunables of the per-frame controller with anti-collapse memory, MCS 5
/// cooldown and near-outage guard.
struct IterateParams {
    std::uint8_t mcs_count = 8;
    std::uint8_t default_mcs = 4;          // nominal operating MCS
    std::uint8_t default_last_good = 3;    // floor for last-good memory
    std::uint32_t retest_period_mask = 15; // re-probe every 16 frames on failure
    std::uint64_t high_retry_thresh = 2;
    std::uint64_t very_high_retry = 3;
    std::uint8_t promote_streak_req = 4;   // clean frames before 4 -> 5
    std::uint8_t mcs5_cooldown_init = 6;
    std::uint8_t mid_cooldown_reduce = 2;
    std::uint8_t outage_guard_init = 10;   // frames held at MCS 3 after an outage
    std::uint8_t outage_exit_streak_req = 3;

    /// Start fresh stations with the low-OK gate already satisfied. Zero-init
    /// (the default) holds MCS 3 until the first outage episode.
    bool prime_low_ok_streak = false;
};

/// Per-station algorithm-map record (12 bytes).
struct AlgoState {
    static constexpr std::size_t kSize = 12;

    std::uint8_t current_mcs = 0;
    std::uint8_t last_good_mcs = 0;   // highest MCS that succeeded recently
    std::uint8_t recent_ok = 0;       // any success since the last failure
    std::uint8_t promote_streak = 0;  // consecutive clean frames at the default MCS
    std::uint8_t mcs5_cooldown = 0;   // frames MCS 5 stays suppressed
    std::uint8_t outage_guard = 0;    // near-outage hold counter
    std::uint8_t low_ok_streak = 0;   // consecutive clean MCS 3 frames
    std::uint8_t pad = 0;
    std::uint32_t frame_count = 0;

    std::array<std::byte, kSize> encode() const;
    static AlgoState decode(std::span<const std::byte> bytes);

    friend bool operator==(const AlgoState&, const AlgoState&) = default;
};

/// Initial record for a station that has never been seen.
AlgoState initial_algo_state(const IterateParams& params);

struct Iterate3Result {
    AlgoState state;
    /// Empty when the context's wcid is rejected (state returned unchanged).
    std::optional<std::uint8_t> chosen;
};

Iterate3Result iterate3_step(const AlgoState& state, const TxStatusContext& ctx, const IterateParams& params = {});

/// Map-backed controller: reads/writes AlgoState records in the algorithm map
/// and publishes each decision to the rate map.
class Iterate3Controller final : public RateController {
public:
    explicit Iterate3Controller(IterateParams params = {}) : params_(params) {}

    std::string_view name() const override { return "iterate3"; }
    std::size_t state_size() const override { return AlgoState::kSize; }
    void on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine) override;

    const IterateParams& params() const { return params_; }

private:
    IterateParams params_;
};

}  // namespace rclab::controllers

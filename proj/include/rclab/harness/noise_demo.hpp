#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/phy/channel.hpp"

namespace rclab::harness {

/// Picks the MCS with the highest expected goodput at the frame's reported
/// signal, then applies `offset` (clamped to 0..7). With offset 0 it is the
/// oracle; offset -1 is strictly worse wherever the oracle is above MCS0
/// (at MCS0 the offset is applied upwards instead).
class GenieController final : public RateController {
public:
    GenieController(phy::ChannelModel model, int offset, int retry_limit = phy::kDefaultRetryLimit);
    std::string_view name() const override { return offset_ == 0 ? "genie" : "genie-offset"; }
    std::size_t state_size() const override { return 0; }
    void on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine) override;
    std::uint8_t pick(double rssi_dbm) const;

private:
    phy::ChannelModel model_;
    int offset_;
    int retry_limit_;
    std::array<std::uint8_t, 256> by_signal_{};  // pick() for integer signals -128..127
};

struct NoiseDemoOptions {
    std::uint64_t seed = 1;
    std::uint32_t trials = 200;
    double start_min_dbm = -84.0;
    double start_max_dbm = -80.0;
    double slope_min_db_per_s = 0.5;
    double slope_max_db_per_s = 1.0;
    double epoch_min_s = 5.0;
    double epoch_max_s = 10.0;
    /// Replace the drift by a constant RSSI.
    bool constant_trace = false;
    double constant_rssi_dbm = -70.0;
    /// Always evaluate B in the second (higher-RSSI) epoch instead of a
    /// random order.
    bool b_second = false;
    /// Use two copies of A.
    bool identical = false;
    unsigned threads = 0;
};

struct EpochResult {
    bool candidate_b = false;
    double start_s = 0.0;
    double mean_rssi_dbm = 0.0;
    double goodput_mbps = 0.0;
    double oracle_goodput_mbps = 0.0;
    double normalized = 0.0;
};

struct TrialResult {
    std::uint32_t trial = 0;
    std::uint64_t seed = 0;
    double start_dbm = 0.0;
    double slope_db_per_s = 0.0;
    double epoch_s = 0.0;
    bool b_first = false;
    EpochResult a;
    EpochResult b;
    bool naive_picks_b = false;
    bool normalized_picks_b = false;
};

struct NoiseDemoResult {
    NoiseDemoOptions options;
    /// Fraction of trials in which each scorer picked B.
    double naive_pick_error_rate = 0.0;
    double normalized_pick_error_rate = 0.0;
    /// Mean goodput of A and B over the fixed RSSI grid (the ground truth).
    double oracle_a_mbps = 0.0;
    double oracle_b_mbps = 0.0;
    std::vector<TrialResult> series;
};

NoiseDemoResult scoring_noise_demo(const NoiseDemoOptions& options);

/// Mean expected goodput of a genie with `offset` over -90..-55 dBm in 0.5 dB
/// steps.
double grid_goodput_mbps(const phy::ChannelModel& model, int offset);

nlohmann::json to_json(const NoiseDemoResult& r);
std::string noise_demo_csv(const NoiseDemoResult& r);

}  // namespace rclab::harness

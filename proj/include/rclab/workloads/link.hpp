#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/phy/channel.hpp"
#include "rclab/util/rng.hpp"

namespace rclab::workloads {

using phy::SimTime;

struct LinkConfig {
    phy::ChannelModel channel = phy::ChannelModel::standard();
    int retry_limit = phy::kDefaultRetryLimit;
    std::uint8_t wcid = 1;
};

/// One station's simulated link: asks the engine for a rate, draws the
/// outcome from the channel, reports the completion back and advances a
/// virtual clock by the airtime spent.
class SimLink {
public:
    SimLink(PolicyEngine& engine, LinkConfig config, std::uint64_t seed);

    struct Sent {
        phy::TxOutcome outcome;
        RateSpec configured;
        SimTime start{0};
        SimTime end{0};
        double rssi_dbm = 0.0;
    };

    Sent send(std::uint32_t payload_bytes);
    /// Advances the clock without transmitting (no-op if `t` is in the past).
    void idle_until(SimTime t);

    SimTime now() const { return now_; }
    double seconds() const { return std::chrono::duration<double>(now_).count(); }
    double rssi() const { return config_.channel.rssi.at(now_); }
    std::uint64_t frames() const { return frames_; }

    /// FNV-1a over the RSSI (0.01 dB resolution) seen by every frame; equal
    /// hashes mean two runs observed the same channel realization.
    std::uint64_t rssi_hash() const { return rssi_hash_; }

    PolicyEngine& engine() { return engine_; }
    const LinkConfig& config() const { return config_; }

    /// Engine calls are made under this mutex when set.
    void set_engine_mutex(std::mutex* mu) { engine_mu_ = mu; }
    /// Called after every completion with the link clock.
    void set_frame_hook(std::function<void(SimTime)> hook) { hook_ = std::move(hook); }

private:
    PolicyEngine& engine_;
    LinkConfig config_;
    Rng rng_;
    SimTime now_{0};
    std::uint64_t frames_ = 0;
    std::uint64_t rssi_hash_ = 0xcbf29ce484222325ULL;
    std::mutex* engine_mu_ = nullptr;
    std::function<void(SimTime)> hook_;
};

struct ExpectedFrame {
    double delivery_prob = 0.0;  // some rung of the ladder succeeds
    double airtime_ns = 0.0;     // mean airtime including retries
};

/// Per-frame expectation of sending once at `rate` through the default
/// fallback ladder at a fixed RSSI.
ExpectedFrame expected_fixed_frame(const phy::ChannelModel& model, const RateSpec& rate, double rssi_dbm,
                                   std::uint32_t payload_bytes = 1500, int retry_limit = phy::kDefaultRetryLimit);

/// Expected goodput of pinning `rate`, from the channel law at a fixed RSSI:
/// delivered payload bits over expected airtime, counting retries and the
/// default fallback ladder.
double expected_fixed_goodput_mbps(const phy::ChannelModel& model, const RateSpec& rate, double rssi_dbm,
                                   std::uint32_t payload_bytes = 1500, int retry_limit = phy::kDefaultRetryLimit);

/// Best expected goodput over MCS 0..7 at `rssi_dbm`.
double oracle_goodput_mbps(const phy::ChannelModel& model, double rssi_dbm, std::uint32_t payload_bytes = 1500,
                           int retry_limit = phy::kDefaultRetryLimit);

/// Expected goodput when frames are spread over MCS 0..7 with `share[m]`
/// (shares sum to 1), each sent through the fallback ladder.
double expected_mix_goodput_mbps(const phy::ChannelModel& model, const std::array<double, phy::kMcsCount>& share,
                                 double rssi_dbm, std::uint32_t payload_bytes = 1500,
                                 int retry_limit = phy::kDefaultRetryLimit);

/// argmax over MCS of phy_rate x p(mcs); ties go to the lower MCS.
std::uint8_t oracle_mcs(const phy::ChannelModel& model, double rssi_dbm);

}  // namespace rclab::workloads

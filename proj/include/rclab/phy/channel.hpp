#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "rclab/util/rng.hpp"

namespace rclab::phy {

using SimTime = std::chrono::nanoseconds;

inline constexpr std::uint8_t kMcsCount = 8;

enum class Bandwidth : std::uint8_t { HT20 = 0, HT40 = 1 };
enum class GuardInterval : std::uint8_t { Long = 0, Short = 1 };
enum class PhyMode : std::uint8_t { HT = 0, LegacyOfdm = 1 };

/// Hardware rate flags as reported in TX status.
inline constexpr std::uint8_t kFlagHt = 0x08;
inline constexpr std::uint8_t kFlagLegacy = 0x00;

/// One transmission rate. For legacy OFDM the index selects from
/// {6, 9, 12, 18, 24, 36, 48, 54} Mbps.
struct RateSpec {
    std::uint8_t mcs = 0;
    std::uint8_t streams = 1;
    Bandwidth bandwidth = Bandwidth::HT20;
    GuardInterval guard = GuardInterval::Long;
    PhyMode phy = PhyMode::HT;

    static constexpr RateSpec ht(std::uint8_t mcs) { return RateSpec{mcs, 1, Bandwidth::HT20, GuardInterval::Long, PhyMode::HT}; }
    static constexpr RateSpec legacy(std::uint8_t index) { return RateSpec{index, 1, Bandwidth::HT20, GuardInterval::Long, PhyMode::LegacyOfdm}; }

    bool is_legacy() const { return phy == PhyMode::LegacyOfdm; }
    std::uint8_t flags() const { return is_legacy() ? kFlagLegacy : kFlagHt; }

    friend bool operator==(const RateSpec&, const RateSpec&) = default;
};

/// Throws std::invalid_argument when the spec violates the single-stream,
/// 8-index domain.
void validate(const RateSpec& spec);

/// PHY rate of `spec` in kbit/s. HT rates follow the 802.11n single-stream
/// table (data subcarriers x coded bits x coding rate / symbol time).
std::uint32_t phy_rate_kbps(const RateSpec& spec);

// RSSI traces -----------------------------------------------------------

struct ConstantTrace {
    double rssi_dbm = -60.0;
};

struct LinearDriftTrace {
    double start_dbm = -60.0;
    double slope_db_per_s = 0.0;
};

struct SinusoidTrace {
    double mean_dbm = -65.0;
    double amplitude_db = 5.0;
    double period_s = 10.0;
    double phase_rad = 0.0;
};

/// Seeded random walk with occasional step-interference events. Samples are
/// generated once over `horizon_s`; the trace holds its last value beyond it.
struct RandomWalkTrace {
    double start_dbm = -65.0;
    double step_db = 0.5;
    double step_interval_s = 0.1;
    double horizon_s = 300.0;
    double min_dbm = -95.0;
    double max_dbm = -30.0;
    double event_probability = 0.0;  // per step
    double event_depth_db = 10.0;
    double event_duration_s = 1.0;
    std::uint64_t seed = 1;
};

class RssiTrace {
public:
    using Kind = std::variant<ConstantTrace, LinearDriftTrace, SinusoidTrace, RandomWalkTrace>;

    RssiTrace() : RssiTrace(ConstantTrace{}) {}
    RssiTrace(Kind kind);  // NOLINT(google-explicit-constructor)

    double at(double time_s) const;
    double at(SimTime t) const { return at(std::chrono::duration<double>(t).count()); }

    const Kind& kind() const { return kind_; }

private:
    Kind kind_;
    std::vector<double> walk_;  // precomputed random-walk samples
};

/// Logistic per-MCS delivery law driven by an RSSI trace.
struct ChannelModel {
    std::array<double, kMcsCount> thresholds_dbm{};
    double width_db = 2.0;
    RssiTrace rssi;
    std::uint64_t seed = 1;

    /// Thresholds spaced 2.5 dB apart from -88 dBm at MCS0, width 2 dB.
    static ChannelModel standard(RssiTrace trace = RssiTrace{}, std::uint64_t seed = 1);

    /// Same law with every threshold shifted by `offset_db`.
    ChannelModel shifted(double offset_db) const;
};

/// Throws std::invalid_argument unless thresholds strictly increase and the
/// width is positive.
void validate(const ChannelModel& model);

double success_probability(const ChannelModel& model, std::uint8_t mcs, double rssi_dbm);

/// Delivery probability for any rate. Legacy rates reuse the threshold of the
/// HT MCS with the same modulation and coding rate.
double delivery_probability(const ChannelModel& model, const RateSpec& rate, double rssi_dbm);

// Transmission ----------------------------------------------------------

inline constexpr SimTime kAttemptOverhead = std::chrono::microseconds(50);
inline constexpr int kDefaultRetryLimit = 3;

/// Airtime of a single attempt: fixed overhead plus payload serialization.
SimTime attempt_airtime(const RateSpec& rate, std::uint32_t payload_bytes);

struct TxOutcome {
    bool success = false;
    std::uint32_t retry_count = 0;
    std::uint8_t hw_mcs_used = 0;
    std::uint8_t hw_rate_flags = kFlagHt;
    SimTime airtime{0};
    /// Attempts spent at the configured rate (first rung).
    std::uint32_t configured_attempts = 0;
};

/// Firmware-style ladder: the configured rate, then up to two lower HT MCS,
/// then legacy 6 Mbps OFDM.
std::vector<RateSpec> default_fallback_ladder(const RateSpec& configured);

/// Attempts `ladder[0]` (the configured rate) up to retry_limit + 1 times,
/// then each lower rung once. retry_count counts every attempt after the first.
TxOutcome transmit_frame(const ChannelModel& model, SimTime time, int retry_limit,
                         std::span<const RateSpec> ladder, std::uint32_t payload_bytes, Rng& rng);

/// Convenience overload using the default ladder for `configured`.
TxOutcome transmit_frame(const ChannelModel& model, SimTime time, const RateSpec& configured,
                         int retry_limit, std::uint32_t payload_bytes, Rng& rng);

}  // namespace rclab::phy

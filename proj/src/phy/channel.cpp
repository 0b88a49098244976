#include "rclab/phy/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rclab::phy {

namespace {

struct HtModulation {
    std::uint32_t coded_bits;   // per subcarrier
    std::uint32_t rate_num;
    std::uint32_t rate_den;
};

constexpr std::array<HtModulation, kMcsCount> kHtModulation{{
    {1, 1, 2},  // BPSK 1/2
    {2, 1, 2},  // QPSK 1/2
    {2, 3, 4},  // QPSK 3/4
    {4, 1, 2},  // 16-QAM 1/2
    {4, 3, 4},  // 16-QAM 3/4
    {6, 2, 3},  // 64-QAM 2/3
    {6, 3, 4},  // 64-QAM 3/4
    {6, 5, 6},  // 64-QAM 5/6
}};

constexpr std::array<std::uint32_t, kMcsCount> kLegacyKbps{6000, 9000, 12000, 18000, 24000, 36000, 48000, 54000};

// HT MCS with the same modulation/coding robustness as each legacy rate.
constexpr std::array<std::uint8_t, kMcsCount> kLegacyEquivalentMcs{0, 0, 1, 2, 3, 4, 5, 6};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate(const RateSpec& spec)
{
    if (spec.mcs >= kMcsCount) {
        throw std::invalid_argument("rate index " + std::to_string(spec.mcs) + " out of range [0,7]");
    }
    if (spec.streams != 1) {
        throw std::invalid_argument("only single-stream rates are supported");
    }
}

std::uint32_t phy_rate_kbps(const RateSpec& spec)
{
    validate(spec);
    if (spec.is_legacy()) {
        return kLegacyKbps[spec.mcs];
    }
    const HtModulation& m = kHtModulation[spec.mcs];
    const std::uint32_t subcarriers = spec.bandwidth == Bandwidth::HT40 ? 108 : 52;
    // Data bits per OFDM symbol, exact because every coding rate divides evenly.
    const std::uint32_t bits_per_symbol = subcarriers * m.coded_bits * m.rate_num / m.rate_den;
    if (spec.guard == GuardInterval::Short) {
        return bits_per_symbol * 10000 / 36;  // 3.6 us symbols
    }
    return bits_per_symbol * 250;  // 4.0 us symbols
}

RssiTrace::RssiTrace(Kind kind) : kind_(std::move(kind))
{
    if (const auto* walk = std::get_if<RandomWalkTrace>(&kind_)) {
        if (walk->step_interval_s <= 0.0 || walk->horizon_s < 0.0) {
            throw std::invalid_argument("random-walk trace needs a positive step interval");
        }
        Rng rng(walk->seed);
        const auto steps = static_cast<std::size_t>(std::ceil(walk->horizon_s / walk->step_interval_s)) + 1;
        const auto event_steps = static_cast<std::size_t>(std::ceil(walk->event_duration_s / walk->step_interval_s));
        walk_.reserve(steps);
        double level = walk->start_dbm;
        std::size_t event_left = 0;
        for (std::size_t i = 0; i < steps; ++i) {
            double sample = level;
            if (event_left > 0) {
                sample -= walk->event_depth_db;
                --event_left;
            }
            walk_.push_back(sample);
            level += rng.bernoulli(0.5) ? walk->step_db : -walk->step_db;
            level = std::clamp(level, walk->min_dbm, walk->max_dbm);
            if (event_left == 0 && rng.bernoulli(walk->event_probability)) {
                event_left = event_steps;
            }
        }
    }
}

double RssiTrace::at(double time_s) const
{
    struct Visitor {
        const RssiTrace& self;
        double t;
        double operator()(const ConstantTrace& c) const { return c.rssi_dbm; }
        double operator()(const LinearDriftTrace& d) const { return d.start_dbm + d.slope_db_per_s * t; }
        double operator()(const SinusoidTrace& s) const
        {
            return s.mean_dbm + s.amplitude_db * std::sin(2.0 * M_PI * t / s.period_s + s.phase_rad);
        }
        double operator()(const RandomWalkTrace& w) const
        {
            if (t <= 0.0) {
                return self.walk_.front();
            }
            const auto idx = static_cast<std::size_t>(t / w.step_interval_s);
            return self.walk_[std::min(idx, self.walk_.size() - 1)];
        }
    };
    return std::visit(Visitor{*this, time_s}, kind_);
}

ChannelModel ChannelModel::standard(RssiTrace trace, std::uint64_t seed)
{
    ChannelModel m;
    for (std::uint8_t i = 0; i < kMcsCount; ++i) {
        m.thresholds_dbm[i] = -88.0 + 2.5 * i;
    }
    m.width_db = 2.0;
    m.rssi = std::move(trace);
    m.seed = seed;
    return m;
}

ChannelModel ChannelModel::shifted(double offset_db) const
{
    ChannelModel m = *this;
    for (auto& t : m.thresholds_dbm) {
        t += offset_db;
    }
    return m;
}

void validate(const ChannelModel& model)
{
    if (!(model.width_db > 0.0)) {
        throw std::invalid_argument("channel width must be positive");
    }
    for (std::size_t i = 1; i < model.thresholds_dbm.size(); ++i) {
        if (!(model.thresholds_dbm[i] > model.thresholds_dbm[i - 1])) {
            throw std::invalid_argument("channel thresholds must strictly increase with MCS");
        }
    }
}

double success_probability(const ChannelModel& model, std::uint8_t mcs, double rssi_dbm)
{
    if (mcs >= kMcsCount) {
        throw std::invalid_argument("MCS out of range");
    }
    return logistic((rssi_dbm - model.thresholds_dbm[mcs]) / model.width_db);
}

double delivery_probability(const ChannelModel& model, const RateSpec& rate, double rssi_dbm)
{
    const std::uint8_t mcs = rate.is_legacy() ? kLegacyEquivalentMcs.at(rate.mcs) : rate.mcs;
    return success_probability(model, mcs, rssi_dbm);
}

SimTime attempt_airtime(const RateSpec& rate, std::uint32_t payload_bytes)
{
    const std::uint64_t bits = std::uint64_t{payload_bytes} * 8;
    const std::uint64_t kbps = phy_rate_kbps(rate);
    // bits / (kbps * 1000) seconds, in nanoseconds, rounded up.
    const std::uint64_t ns = (bits * 1'000'000 + kbps - 1) / kbps;
    return kAttemptOverhead + SimTime(static_cast<SimTime::rep>(ns));
}

std::vector<RateSpec> default_fallback_ladder(const RateSpec& configured)
{
    std::vector<RateSpec> ladder{configured};
    if (configured.is_legacy()) {
        if (configured.mcs > 0) {
            ladder.push_back(RateSpec::legacy(0));
        }
        return ladder;
    }
    for (int step = 1; step <= 2 && configured.mcs >= step; ++step) {
        RateSpec lower = configured;
        lower.mcs = static_cast<std::uint8_t>(configured.mcs - step);
        ladder.push_back(lower);
    }
    ladder.push_back(RateSpec::legacy(0));
    return ladder;
}

TxOutcome transmit_frame(const ChannelModel& model, SimTime time, int retry_limit,
                         std::span<const RateSpec> ladder, std::uint32_t payload_bytes, Rng& rng)
{
    if (retry_limit < 0) {
        throw std::invalid_argument("retry limit must be nonnegative");
    }
    if (ladder.empty()) {
        throw std::invalid_argument("fallback ladder must contain the configured rate");
    }
    const double rssi = model.rssi.at(time);
    TxOutcome out;
    std::uint32_t attempts = 0;
    for (std::size_t rung = 0; rung < ladder.size(); ++rung) {
        const RateSpec& rate = ladder[rung];
        const int tries = rung == 0 ? retry_limit + 1 : 1;
        const double p = delivery_probability(model, rate, rssi);
        const SimTime airtime = attempt_airtime(rate, payload_bytes);
        for (int i = 0; i < tries; ++i) {
            ++attempts;
            if (rung == 0) {
                ++out.configured_attempts;
            }
            out.airtime += airtime;
            out.hw_mcs_used = rate.mcs;
            out.hw_rate_flags = rate.flags();
            if (rng.bernoulli(p)) {
                out.success = true;
                out.retry_count = attempts - 1;
                return out;
            }
        }
    }
    out.retry_count = attempts - 1;
    return out;
}

TxOutcome transmit_frame(const ChannelModel& model, SimTime time, const RateSpec& configured,
                         int retry_limit, std::uint32_t payload_bytes, Rng& rng)
{
    const auto ladder = default_fallback_ladder(configured);
    return transmit_frame(model, time, retry_limit, ladder, payload_bytes, rng);
}

}  // namespace rclab::phy

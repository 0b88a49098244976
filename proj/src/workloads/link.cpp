#include "rclab/workloads/link.hpp"

#include <cmath>

namespace rclab::workloads {

SimLink::SimLink(PolicyEngine& engine, LinkConfig config, std::uint64_t seed)
    : engine_(engine), config_(std::move(config)), rng_(mix_seed(seed, 0x11))
{
    phy::validate(config_.channel);
    if (!valid_wcid(config_.wcid)) {
        throw std::invalid_argument("link wcid must be in 1..127");
    }
}

SimLink::Sent SimLink::send(std::uint32_t payload_bytes)
{
    Sent s;
    s.start = now_;
    s.rssi_dbm = rssi();
    {
        std::unique_lock<std::mutex> lock;
        if (engine_mu_ != nullptr) lock = std::unique_lock(*engine_mu_);
        s.configured = engine_.get_rate(config_.wcid, FrameType::Data);
        s.outcome = phy::transmit_frame(config_.channel, now_, s.configured, config_.retry_limit, payload_bytes, rng_);
        now_ += s.outcome.airtime;
        s.end = now_;

        TxCompletion c;
        c.wcid = config_.wcid;
        c.outcome = s.outcome;
        c.configured = s.configured;
        c.frame_length = payload_bytes;
        c.time = now_;
        c.rssi_dbm = s.rssi_dbm;
        engine_.on_tx_completion(c);
    }
    ++frames_;
    const auto q = static_cast<std::int64_t>(std::llround(s.rssi_dbm * 100.0));
    for (int i = 0; i < 8; ++i) {
        rssi_hash_ ^= static_cast<std::uint64_t>(q >> (8 * i)) & 0xFF;
        rssi_hash_ *= 0x100000001b3ULL;
    }
    if (hook_) hook_(now_);
    return s;
}

void SimLink::idle_until(SimTime t)
{
    if (t > now_) now_ = t;
}

ExpectedFrame expected_fixed_frame(const phy::ChannelModel& model, const RateSpec& rate, double rssi_dbm,
                                   std::uint32_t payload_bytes, int retry_limit)
{
    const auto ladder = phy::default_fallback_ladder(rate);
    double reach = 1.0;  // probability the next attempt happens
    ExpectedFrame f;
    for (std::size_t rung = 0; rung < ladder.size(); ++rung) {
        const int attempts = rung == 0 ? retry_limit + 1 : 1;
        const double p = phy::delivery_probability(model, ladder[rung], rssi_dbm);
        const double t = static_cast<double>(phy::attempt_airtime(ladder[rung], payload_bytes).count());
        for (int a = 0; a < attempts; ++a) {
            f.airtime_ns += reach * t;
            reach *= 1.0 - p;
        }
    }
    f.delivery_prob = 1.0 - reach;
    return f;
}

double expected_fixed_goodput_mbps(const phy::ChannelModel& model, const RateSpec& rate, double rssi_dbm,
                                   std::uint32_t payload_bytes, int retry_limit)
{
    const auto f = expected_fixed_frame(model, rate, rssi_dbm, payload_bytes, retry_limit);
    return 8.0 * payload_bytes * f.delivery_prob / f.airtime_ns * 1e3;  // bits per ns -> Mbit/s
}

double oracle_goodput_mbps(const phy::ChannelModel& model, double rssi_dbm, std::uint32_t payload_bytes, int retry_limit)
{
    double best = 0.0;
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) {
        best = std::max(best, expected_fixed_goodput_mbps(model, RateSpec::ht(m), rssi_dbm, payload_bytes, retry_limit));
    }
    return best;
}

double expected_mix_goodput_mbps(const phy::ChannelModel& model, const std::array<double, phy::kMcsCount>& share,
                                 double rssi_dbm, std::uint32_t payload_bytes, int retry_limit)
{
    double bits = 0.0;
    double ns = 0.0;
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) {
        if (share[m] <= 0.0) continue;
        const auto f = expected_fixed_frame(model, RateSpec::ht(m), rssi_dbm, payload_bytes, retry_limit);
        bits += share[m] * 8.0 * payload_bytes * f.delivery_prob;
        ns += share[m] * f.airtime_ns;
    }
    return ns > 0.0 ? bits / ns * 1e3 : 0.0;
}

std::uint8_t oracle_mcs(const phy::ChannelModel& model, double rssi_dbm)
{
    std::uint8_t best = 0;
    double best_v = -1.0;
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) {
        const double v = phy::phy_rate_kbps(RateSpec::ht(m)) * phy::success_probability(model, m, rssi_dbm);
        if (v > best_v) {
            best_v = v;
            best = m;
        }
    }
    return best;
}

}  // namespace rclab::workloads

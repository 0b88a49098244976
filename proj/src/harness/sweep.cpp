#include "rclab/harness/sweep.hpp"

#include <chrono>
#include <sstream>
#include <stdexcept>

namespace rclab::harness {

SweepResult sweep_all_rates(workloads::SimLink& link, std::uint32_t frames_per_rate, std::uint32_t cycles,
                            std::uint32_t payload_bytes)
{
    if (frames_per_rate < 1) throw std::invalid_argument("frames_per_rate must be >= 1");
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    auto& engine = link.engine();
    const PolicyMode saved = engine.policy();
    const int retry_limit = link.config().retry_limit;
    const std::uint8_t wcid = link.config().wcid;

    RoundRobinPolicy rr;
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) rr.rates.push_back(RateSpec::ht(m));
    rr.frames_per_rate = frames_per_rate;
    engine.set_policy(rr);
    engine.telemetry().snapshot_read();  // discard older history

    SweepResult out;
    out.rows.resize(phy::kMcsCount);
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) out.rows[m].mcs = m;

    auto fold = [&] {
        for (const auto& e : engine.telemetry().snapshot_read()) {
            if (e.wcid != wcid || e.intended_mcs >= phy::kMcsCount) continue;
            auto& row = out.rows[e.intended_mcs];
            ++row.frames;
            const bool at_intended = e.success() && !e.fell_back();
            if (e.success()) ++row.delivered_any;
            if (at_intended) {
                ++row.delivered;
                row.attempts += e.retry_count + 1u;
            } else {
                row.attempts += static_cast<std::uint64_t>(retry_limit) + 1u;
            }
        }
    };

    const std::uint64_t total = static_cast<std::uint64_t>(frames_per_rate) * phy::kMcsCount * cycles;
    // Drain well before the ring could wrap.
    const std::uint64_t drain_every = engine.telemetry().capacity() / 2;
    for (std::uint64_t i = 0; i < total; ++i) {
        const auto sent = link.send(payload_bytes);
        if (sent.configured.mcs < phy::kMcsCount) {
            out.rows[sent.configured.mcs].airtime_s += std::chrono::duration<double>(sent.outcome.airtime).count();
        }
        if ((i + 1) % drain_every == 0) fold();
    }
    fold();
    engine.set_policy(saved);

    out.total_frames = total;
    double best = -1.0;
    for (auto& row : out.rows) {
        if (row.frames > 0) row.delivery_ratio = static_cast<double>(row.delivered) / static_cast<double>(row.frames);
        if (row.attempts > 0) {
            row.success_probability = static_cast<double>(row.delivered) / static_cast<double>(row.attempts);
        }
        row.expected_throughput_mbps = phy::phy_rate_kbps(RateSpec::ht(row.mcs)) / 1000.0 * row.success_probability;
        if (row.airtime_s > 0) {
            row.goodput_mbps = static_cast<double>(row.delivered) * payload_bytes * 8.0 / row.airtime_s / 1e6;
        }
        if (row.goodput_mbps > best) {
            best = row.goodput_mbps;
            out.best_goodput_mcs = row.mcs;
        }
    }
    return out;
}

nlohmann::json to_json(const SweepResult& r)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"mcs", row.mcs},
                        {"frames", row.frames},
                        {"delivered", row.delivered},
                        {"delivered_any", row.delivered_any},
                        {"attempts", row.attempts},
                        {"delivery_ratio", row.delivery_ratio},
                        {"success_probability", row.success_probability},
                        {"expected_throughput_mbps", row.expected_throughput_mbps},
                        {"goodput_mbps", row.goodput_mbps},
                        {"airtime_s", row.airtime_s}});
    }
    return {{"total_frames", r.total_frames}, {"best_goodput_mcs", r.best_goodput_mcs}, {"rates", rows}};
}

std::string sweep_csv(const SweepResult& r)
{
    std::ostringstream os;
    os.precision(10);
    os << "mcs,frames,delivered,delivered_any,attempts,delivery_ratio,success_probability,expected_throughput_mbps,"
          "goodput_mbps,airtime_s\n";
    for (const auto& row : r.rows) {
        os << int(row.mcs) << ',' << row.frames << ',' << row.delivered << ',' << row.delivered_any << ','
           << row.attempts << ',' << row.delivery_ratio << ',' << row.success_probability << ','
           << row.expected_throughput_mbps << ',' << row.goodput_mbps << ',' << row.airtime_s << '\n';
    }
    return os.str();
}

}  // namespace rclab::harness

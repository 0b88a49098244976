#include "rclab/workloads/qoe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rclab::workloads {

double voip_r_factor(double loss_fraction, double mean_delay_ms, double jitter_ms)
{
    if (!std::isfinite(loss_fraction) || !std::isfinite(mean_delay_ms) || !std::isfinite(jitter_ms) || loss_fraction < 0.0 ||
        loss_fraction > 1.0) {
        throw std::invalid_argument("voip_mos: loss must be in [0, 1] and all inputs finite");
    }
    const double d = mean_delay_ms + 2.0 * jitter_ms;
    const double id = 0.024 * d + (d > 177.3 ? 0.11 * (d - 177.3) : 0.0);
    const double ppl = 100.0 * loss_fraction;
    const double ie_eff = 95.0 * ppl / (ppl + 4.3);
    return 93.2 - id - ie_eff;
}

double r_to_mos(double r)
{
    if (r <= 0.0) return 1.0;
    if (r >= 100.0) return 4.5;
    const double mos = 1.0 + 0.035 * r + 7e-6 * r * (r - 60.0) * (100.0 - r);
    return std::clamp(mos, 1.0, 4.5);
}

double voip_mos(double loss_fraction, double mean_delay_ms, double jitter_ms)
{
    return r_to_mos(voip_r_factor(loss_fraction, mean_delay_ms, jitter_ms));
}

double stall_ratio(std::span<const double> fetch_times_s, double segment_play_s)
{
    if (fetch_times_s.empty() || segment_play_s <= 0.0) {
        throw std::invalid_argument("video_mos needs at least one fetch time and a positive segment duration");
    }
    double stall = 0.0;
    for (double f : fetch_times_s) {
        stall += std::max(0.0, f - segment_play_s);
    }
    return stall / (segment_play_s * static_cast<double>(fetch_times_s.size()));
}

double video_mos(std::span<const double> fetch_times_s, double segment_play_s)
{
    return std::clamp(1.0 + 3.5 * std::exp(-4.0 * stall_ratio(fetch_times_s, segment_play_s)), 1.0, 4.5);
}

FlowMetrics flow_metrics(std::span<const PacketRecord> log, std::span<const std::uint64_t> flow_bytes, double duration_s)
{
    FlowMetrics m;
    const phy::SimTime horizon = std::chrono::duration_cast<phy::SimTime>(std::chrono::duration<double>(duration_s));
    std::vector<std::uint64_t> got(flow_bytes.size(), 0);
    std::vector<std::optional<phy::SimTime>> first(flow_bytes.size());
    std::vector<phy::SimTime> last(flow_bytes.size(), phy::SimTime{0});
    std::uint64_t in_window = 0;

    for (const auto& p : log) {
        if (p.flow >= flow_bytes.size()) {
            throw std::invalid_argument("packet references unknown flow " + std::to_string(p.flow));
        }
        if (!first[p.flow] || p.enqueued < *first[p.flow]) first[p.flow] = p.enqueued;
        if (!p.delivered) {
            ++m.lost_packets;
            continue;
        }
        m.delivered_bytes += p.bytes;
        if (*p.delivered <= horizon) in_window += p.bytes;
        got[p.flow] += p.bytes;
        last[p.flow] = std::max(last[p.flow], *p.delivered);
        m.delays_ms.push_back(std::chrono::duration<double, std::milli>(*p.delivered - p.enqueued).count());
    }
    m.goodput_mbps = duration_s > 0.0 ? static_cast<double>(in_window) * 8.0 / duration_s / 1e6 : 0.0;

    double fct_sum = 0.0;
    std::size_t completed = 0;
    for (std::size_t f = 0; f < flow_bytes.size(); ++f) {
        if (first[f] && got[f] >= flow_bytes[f]) {
            const double fct = std::chrono::duration<double>(last[f] - *first[f]).count();
            m.fct_s.push_back(fct);
            fct_sum += fct;
            ++completed;
        } else {
            m.fct_s.push_back(kInf);
            ++m.censored_flows;
        }
    }
    if (completed > 0) m.mean_fct_s = fct_sum / static_cast<double>(completed);

    if (!m.delays_ms.empty()) {
        double sum = 0.0;
        for (double d : m.delays_ms) sum += d;
        m.mean_delay_ms = sum / static_cast<double>(m.delays_ms.size());
        double jit = 0.0;
        for (std::size_t i = 1; i < m.delays_ms.size(); ++i) jit += std::abs(m.delays_ms[i] - m.delays_ms[i - 1]);
        m.jitter_ms = m.delays_ms.size() > 1 ? jit / static_cast<double>(m.delays_ms.size() - 1) : 0.0;
    }
    return m;
}

}  // namespace rclab::workloads

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rclab/phy/channel.hpp"

namespace rclab::workloads {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// E-model variant for G.711 (Ie = 0, Bpl = 4.3). Delay and jitter in ms.
double voip_mos(double loss_fraction, double mean_delay_ms, double jitter_ms);

/// Transmission rating factor behind voip_mos.
double voip_r_factor(double loss_fraction, double mean_delay_ms, double jitter_ms);

/// Maps an R factor to MOS, clamped to [1, 4.5].
double r_to_mos(double r);

/// Exponential stall model: 1 + 3.5 * exp(-4 * stall_ratio), clamped.
double video_mos(std::span<const double> fetch_times_s, double segment_play_s = 3.5);

double stall_ratio(std::span<const double> fetch_times_s, double segment_play_s = 3.5);

/// One packet handed to the link, delivered or not.
struct PacketRecord {
    std::uint32_t flow = 0;
    std::uint32_t bytes = 0;
    phy::SimTime enqueued{0};
    std::optional<phy::SimTime> delivered;
};

struct FlowMetrics {
    double goodput_mbps = 0.0;  // decimal megabits
    std::uint64_t delivered_bytes = 0;
    std::uint64_t lost_packets = 0;
    /// Per flow; +inf when the flow never completed.
    std::vector<double> fct_s;
    std::uint32_t censored_flows = 0;
    /// Mean over completed flows; +inf when none completed.
    double mean_fct_s = kInf;
    std::vector<double> delays_ms;  // delivered packets, in log order
    double mean_delay_ms = 0.0;
    /// Mean absolute difference of successive packet delays.
    double jitter_ms = 0.0;
};

/// `flow_bytes[i]` is the size of flow i. Goodput counts bytes delivered by
/// `duration_s`.
FlowMetrics flow_metrics(std::span<const PacketRecord> log, std::span<const std::uint64_t> flow_bytes, double duration_s);

}  // namespace rclab::workloads

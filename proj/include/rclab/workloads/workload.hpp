#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rclab/workloads/link.hpp"
#include "rclab/workloads/qoe.hpp"

namespace rclab::workloads {

enum class WorkloadKind { PeakThroughput, FileDownload, WebPage, VoIP, Video };

std::string to_string(WorkloadKind k);
/// Accepts the snake_case names ("peak_throughput", "voip", ...).
WorkloadKind workload_kind_from_string(const std::string& s);
std::vector<WorkloadKind> all_workload_kinds();

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::PeakThroughput;
    double duration_s = 10.0;         // PeakThroughput run length, VoIP call length
    std::uint64_t burst_bytes = 0;    // FileDownload / WebPage / Video unit (decimal bytes)
    std::uint32_t repeats = 1;        // bursts, page loads or segments
    std::uint32_t packet_bytes = 160;  // VoIP
    double packet_interval_s = 0.020;  // VoIP
    double segment_play_s = 3.5;       // Video
    /// Simulated-time ceiling for bulk kinds; unfinished flows are censored.
    double time_cap_s = 120.0;

    static WorkloadSpec defaults(WorkloadKind kind);
    /// Throws std::invalid_argument on nonsensical parameters.
    void validate() const;
};

struct TransportModel {
    std::uint32_t payload_bytes = 1500;
    std::size_t queue_capacity = 128;
};

struct QoEResult {
    WorkloadKind kind = WorkloadKind::PeakThroughput;
    std::string metric_name;  // goodput_mbps | mean_fct_s | voip_mos | video_mos
    double metric = 0.0;
    bool higher_is_better = true;

    double goodput_mbps = 0.0;
    double mean_fct_s = kInf;
    std::vector<double> fct_s;
    std::uint32_t censored_flows = 0;
    std::optional<double> voip_mos;
    std::optional<double> video_mos;

    std::uint64_t packets_sent = 0;
    std::uint64_t packets_lost = 0;  // queue drops plus exhausted retries
    double loss_fraction = 0.0;
    double mean_delay_ms = 0.0;
    double jitter_ms = 0.0;
    std::vector<double> delays_ms;
    std::vector<double> fetch_times_s;
    std::vector<std::uint64_t> segment_bytes;

    std::uint64_t frames = 0;
    std::uint64_t bytes_delivered = 0;
    double sim_duration_s = 0.0;
    std::uint64_t rssi_hash = 0;
    bool stopped_early = false;
};

struct RunControl {
    /// Polled between frames; returning true ends the run.
    std::function<bool()> should_stop;
};

/// Drives `workload` through `link` (and so its engine and channel).
QoEResult run_workload(SimLink& link, const WorkloadSpec& workload, const TransportModel& transport = {},
                       const RunControl& control = {});

/// Full result including raw series. Non-finite values become null.
void to_json(nlohmann::json& j, const QoEResult& r);
/// Summary without the raw series.
nlohmann::json summary_json(const QoEResult& r);

std::string qoe_csv_header();
std::string qoe_csv_row(const QoEResult& r);

}  // namespace rclab::workloads

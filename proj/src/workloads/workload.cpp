#include "rclab/workloads/workload.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rclab::workloads {

namespace {

SimTime from_seconds(double s)
{
    return std::chrono::duration_cast<SimTime>(std::chrono::duration<double>(s));
}

double seconds(SimTime t) { return std::chrono::duration<double>(t).count(); }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string csv_num(double v)
{
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

bool stop_requested(const RunControl& c) { return c.should_stop && c.should_stop(); }

struct Bulk {
    std::vector<PacketRecord> log;
    std::vector<std::uint64_t> flow_bytes;
    std::vector<double> flow_time;  // per flow, +inf if unfinished
    bool stopped = false;
};

/// Saturating reliable sender: keeps the queue full from the current flow and
/// resends the head frame until it is delivered.
Bulk run_bulk(SimLink& link, std::uint64_t bytes_per_flow, std::uint32_t flows, bool endless, SimTime deadline,
              const TransportModel& t, const RunControl& control)
{
    Bulk b;
    for (std::uint32_t f = 0; f < flows; ++f) {
        const SimTime start = link.now();
        if (start >= deadline) break;
        b.flow_bytes.push_back(bytes_per_flow);
        std::uint64_t remaining = bytes_per_flow;
        std::deque<std::size_t> queue;
        while ((endless || remaining > 0 || !queue.empty()) && link.now() < deadline) {
            if (stop_requested(control)) {
                b.stopped = true;
                break;
            }
            while (queue.size() < t.queue_capacity && (endless || remaining > 0)) {
                const auto n = static_cast<std::uint32_t>(endless ? t.payload_bytes
                                                                  : std::min<std::uint64_t>(t.payload_bytes, remaining));
                remaining -= endless ? 0 : n;
                b.log.push_back({f, n, link.now(), std::nullopt});
                queue.push_back(b.log.size() - 1);
            }
            const std::size_t head = queue.front();
            const auto sent = link.send(b.log[head].bytes);
            if (sent.outcome.success) {
                b.log[head].delivered = link.now();
                queue.pop_front();
            }
        }
        // Frames still queued were never delivered; drop them from the log
        // so they do not count as losses of a reliable transport.
        while (!queue.empty()) {
            b.log.erase(b.log.begin() + static_cast<std::ptrdiff_t>(queue.back()));
            queue.pop_back();
        }
        const bool done = !endless && remaining == 0;
        b.flow_time.push_back(done ? seconds(link.now() - start) : kInf);
        if (b.stopped) break;
    }
    return b;
}

}  // namespace

std::string to_string(WorkloadKind k)
{
    switch (k) {
    case WorkloadKind::PeakThroughput:
        return "peak_throughput";
    case WorkloadKind::FileDownload:
        return "file_download";
    case WorkloadKind::WebPage:
        return "web_page";
    case WorkloadKind::VoIP:
        return "voip";
    case WorkloadKind::Video:
        return "video";
    }
    return "unknown";
}

WorkloadKind workload_kind_from_string(const std::string& s)
{
    for (auto k : all_workload_kinds()) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown workload kind '" + s + "'");
}

std::vector<WorkloadKind> all_workload_kinds()
{
    return {WorkloadKind::PeakThroughput, WorkloadKind::FileDownload, WorkloadKind::WebPage, WorkloadKind::VoIP,
            WorkloadKind::Video};
}

WorkloadSpec WorkloadSpec::defaults(WorkloadKind kind)
{
    WorkloadSpec w;
    w.kind = kind;
    switch (kind) {
    case WorkloadKind::PeakThroughput:
        w.duration_s = 10.0;
        break;
    case WorkloadKind::FileDownload:
        w.burst_bytes = 25'000'000;
        w.repeats = 3;
        break;
    case WorkloadKind::WebPage:
        w.burst_bytes = 1'246'000;
        w.repeats = 10;
        break;
    case WorkloadKind::VoIP:
        w.duration_s = 30.0;
        w.packet_bytes = 160;
        w.packet_interval_s = 0.020;
        break;
    case WorkloadKind::Video:
        w.burst_bytes = 1'800'000;
        w.repeats = 10;
        w.segment_play_s = 3.5;
        break;
    }
    return w;
}

void WorkloadSpec::validate() const
{
    const bool bulk = kind == WorkloadKind::FileDownload || kind == WorkloadKind::WebPage || kind == WorkloadKind::Video;
    if (bulk && (burst_bytes == 0 || repeats == 0)) {
        throw std::invalid_argument(to_string(kind) + ": burst_bytes and repeats must be positive");
    }
    if ((kind == WorkloadKind::PeakThroughput || kind == WorkloadKind::VoIP) && !(duration_s > 0.0)) {
        throw std::invalid_argument(to_string(kind) + ": duration_s must be positive");
    }
    if (kind == WorkloadKind::VoIP && (packet_bytes == 0 || !(packet_interval_s > 0.0))) {
        throw std::invalid_argument("voip: packet_bytes and packet_interval_s must be positive");
    }
    if (kind == WorkloadKind::Video && !(segment_play_s > 0.0)) {
        throw std::invalid_argument("video: segment_play_s must be positive");
    }
    if (!(time_cap_s > 0.0)) {
        throw std::invalid_argument(to_string(kind) + ": time_cap_s must be positive");
    }
}

QoEResult run_workload(SimLink& link, const WorkloadSpec& w, const TransportModel& t, const RunControl& control)
{
    w.validate();
    if (t.payload_bytes == 0 || t.queue_capacity == 0) {
        throw std::invalid_argument("transport payload and queue capacity must be positive");
    }
    QoEResult r;
    r.kind = w.kind;
    const SimTime t0 = link.now();
    const std::uint64_t frames0 = link.frames();

    switch (w.kind) {
    case WorkloadKind::PeakThroughput: {
        const Bulk b = run_bulk(link, 0, 1, true, t0 + from_seconds(w.duration_s), t, control);
        std::vector<PacketRecord> shifted = b.log;
        for (auto& p : shifted) {
            p.enqueued -= t0;
            if (p.delivered) *p.delivered -= t0;
        }
        const std::uint64_t endless[] = {std::numeric_limits<std::uint64_t>::max()};
        const FlowMetrics m = flow_metrics(shifted, endless, w.duration_s);
        r.goodput_mbps = m.goodput_mbps;
        r.bytes_delivered = m.delivered_bytes;
        r.mean_delay_ms = m.mean_delay_ms;
        r.jitter_ms = m.jitter_ms;
        r.packets_sent = b.log.size();
        r.metric_name = "goodput_mbps";
        r.metric = r.goodput_mbps;
        r.stopped_early = b.stopped;
        break;
    }
    case WorkloadKind::FileDownload:
    case WorkloadKind::WebPage:
    case WorkloadKind::Video: {
        const Bulk b = run_bulk(link, w.burst_bytes, w.repeats, false, t0 + from_seconds(w.time_cap_s), t, control);
        const double elapsed = seconds(link.now() - t0);
        const FlowMetrics m = flow_metrics(b.log, b.flow_bytes, elapsed);
        r.goodput_mbps = m.goodput_mbps;
        r.bytes_delivered = m.delivered_bytes;
        r.fct_s = b.flow_time;
        r.censored_flows = 0;
        double sum = 0.0;
        std::size_t done = 0;
        for (double f : b.flow_time) {
            if (std::isfinite(f)) {
                sum += f;
                ++done;
            } else {
                ++r.censored_flows;
            }
        }
        // Flows never started before the cap are censored too.
        r.censored_flows += w.repeats - static_cast<std::uint32_t>(b.flow_time.size());
        r.mean_fct_s = done > 0 ? sum / static_cast<double>(done) : kInf;
        r.mean_delay_ms = m.mean_delay_ms;
        r.jitter_ms = m.jitter_ms;
        r.packets_sent = b.log.size();
        r.stopped_early = b.stopped;
        if (w.kind == WorkloadKind::Video) {
            r.segment_bytes.assign(b.flow_bytes.size(), 0);
            for (const auto& p : b.log) {
                if (p.delivered) r.segment_bytes[p.flow] += p.bytes;
            }
            // An unfinished segment stalls until the cap.
            for (std::size_t i = 0; i < b.flow_time.size(); ++i) {
                r.fetch_times_s.push_back(std::isfinite(b.flow_time[i]) ? b.flow_time[i] : std::max(w.time_cap_s, w.segment_play_s));
            }
            while (r.fetch_times_s.size() < w.repeats) r.fetch_times_s.push_back(std::max(w.time_cap_s, w.segment_play_s));
            r.video_mos = video_mos(r.fetch_times_s, w.segment_play_s);
            r.metric_name = "video_mos";
            r.metric = *r.video_mos;
        } else {
            r.metric_name = "mean_fct_s";
            r.metric = r.mean_fct_s;
            r.higher_is_better = false;
        }
        break;
    }
    case WorkloadKind::VoIP: {
        const auto count = static_cast<std::uint64_t>(std::llround(w.duration_s / w.packet_interval_s));
        const SimTime gap = from_seconds(w.packet_interval_s);
        std::vector<PacketRecord> log;
        std::deque<std::size_t> queue;
        std::uint64_t next = 0;
        std::uint64_t dropped = 0;
        while (next < count || !queue.empty()) {
            if (stop_requested(control)) {
                r.stopped_early = true;
                break;
            }
            if (queue.empty()) link.idle_until(t0 + gap * static_cast<std::int64_t>(next));
            while (next < count && t0 + gap * static_cast<std::int64_t>(next) <= link.now()) {
                const SimTime at = t0 + gap * static_cast<std::int64_t>(next);
                log.push_back({0, w.packet_bytes, at, std::nullopt});
                if (queue.size() < t.queue_capacity) {
                    queue.push_back(log.size() - 1);
                } else {
                    ++dropped;  // tail drop, never transmitted
                }
                ++next;
            }
            if (queue.empty()) continue;
            const std::size_t head = queue.front();
            queue.pop_front();
            if (link.send(log[head].bytes).outcome.success) {
                log[head].delivered = link.now();
            }
        }
        const std::uint64_t total[] = {static_cast<std::uint64_t>(log.size()) * w.packet_bytes};
        const FlowMetrics m = flow_metrics(log, total, w.duration_s);
        r.packets_sent = log.size();
        r.packets_lost = m.lost_packets;
        r.loss_fraction = log.empty() ? 0.0 : static_cast<double>(m.lost_packets) / static_cast<double>(log.size());
        r.delays_ms = m.delays_ms;
        r.mean_delay_ms = m.mean_delay_ms;
        r.jitter_ms = m.jitter_ms;
        r.goodput_mbps = m.goodput_mbps;
        r.bytes_delivered = m.delivered_bytes;
        r.voip_mos = voip_mos(r.loss_fraction, r.mean_delay_ms, r.jitter_ms);
        r.metric_name = "voip_mos";
        r.metric = *r.voip_mos;
        (void)dropped;
        break;
    }
    }
    r.frames = link.frames() - frames0;
    r.sim_duration_s = seconds(link.now() - t0);
    r.rssi_hash = link.rssi_hash();
    return r;
}

nlohmann::json summary_json(const QoEResult& r)
{
    nlohmann::json j{
        {"kind", to_string(r.kind)},
        {"metric_name", r.metric_name},
        {"metric", finite_or_null(r.metric)},
        {"higher_is_better", r.higher_is_better},
        {"goodput_mbps", r.goodput_mbps},
        {"mean_fct_s", finite_or_null(r.mean_fct_s)},
        {"censored_flows", r.censored_flows},
        {"voip_mos", r.voip_mos ? nlohmann::json(*r.voip_mos) : nlohmann::json(nullptr)},
        {"video_mos", r.video_mos ? nlohmann::json(*r.video_mos) : nlohmann::json(nullptr)},
        {"packets_sent", r.packets_sent},
        {"packets_lost", r.packets_lost},
        {"loss_fraction", r.loss_fraction},
        {"mean_delay_ms", r.mean_delay_ms},
        {"jitter_ms", r.jitter_ms},
        {"frames", r.frames},
        {"bytes_delivered", r.bytes_delivered},
        {"sim_duration_s", r.sim_duration_s},
        {"rssi_hash", r.rssi_hash},
        {"stopped_early", r.stopped_early},
    };
    return j;
}

void to_json(nlohmann::json& j, const QoEResult& r)
{
    j = summary_json(r);
    nlohmann::json fct = nlohmann::json::array();
    for (double f : r.fct_s) fct.push_back(finite_or_null(f));
    j["fct_s"] = fct;
    j["delays_ms"] = r.delays_ms;
    j["fetch_times_s"] = r.fetch_times_s;
    j["segment_bytes"] = r.segment_bytes;
}

std::string qoe_csv_header()
{
    return "kind,metric_name,metric,goodput_mbps,mean_fct_s,censored_flows,voip_mos,video_mos,packets_sent,"
           "packets_lost,loss_fraction,mean_delay_ms,jitter_ms,frames,bytes_delivered,sim_duration_s";
}

std::string qoe_csv_row(const QoEResult& r)
{
    std::ostringstream os;
    os << to_string(r.kind) << ',' << r.metric_name << ',' << csv_num(r.metric) << ',' << csv_num(r.goodput_mbps) << ','
       << csv_num(r.mean_fct_s) << ',' << r.censored_flows << ',' << (r.voip_mos ? csv_num(*r.voip_mos) : "") << ','
       << (r.video_mos ? csv_num(*r.video_mos) : "") << ',' << r.packets_sent << ',' << r.packets_lost << ','
       << csv_num(r.loss_fraction) << ',' << csv_num(r.mean_delay_ms) << ',' << csv_num(r.jitter_ms) << ',' << r.frames
       << ',' << r.bytes_delivered << ',' << csv_num(r.sim_duration_s);
    return os.str();
}

}  // namespace rclab::workloads

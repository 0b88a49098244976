#include "rclab/telemetry/ring.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "rclab/phy/channel.hpp"
#include "rclab/util/bytes.hpp"

namespace rclab::telemetry {

bool TelemetryEntry::fell_back() const
{
    return hw_mcs != intended_mcs || hw_flags == phy::kFlagLegacy;
}

std::array<std::byte, TelemetryEntry::kSize> TelemetryEntry::encode() const
{
    std::array<std::byte, kSize> out{};
    ByteWriter w(out);
    w.put(seq);
    w.put(timestamp_us);
    w.put(wcid);
    w.put(intended_mcs);
    w.put(intended_flags);
    w.put(hw_mcs);
    w.put(hw_flags);
    w.put(retry_count);
    w.put(outcome_flags);
    w.put(rssi);
    w.put(frame_length);
    w.put(reserved);
    return out;
}

TelemetryEntry TelemetryEntry::decode(std::span<const std::byte> bytes)
{
    require_size(bytes, kSize, "TelemetryEntry");
    ByteReader r(bytes);
    TelemetryEntry e;
    e.seq = r.get<std::uint32_t>();
    e.timestamp_us = r.get<std::uint32_t>();
    e.wcid = r.get<std::uint8_t>();
    e.intended_mcs = r.get<std::uint8_t>();
    e.intended_flags = r.get<std::uint8_t>();
    e.hw_mcs = r.get<std::uint8_t>();
    e.hw_flags = r.get<std::uint8_t>();
    e.retry_count = r.get<std::uint8_t>();
    e.outcome_flags = r.get<std::uint8_t>();
    e.rssi = r.get<std::int8_t>();
    e.frame_length = r.get<std::uint16_t>();
    e.reserved = r.get<std::uint16_t>();
    return e;
}

void to_json(nlohmann::json& j, const TelemetryEntry& e)
{
    j = nlohmann::json{{"seq", e.seq},
                       {"timestamp_us", e.timestamp_us},
                       {"wcid", e.wcid},
                       {"intended_mcs", e.intended_mcs},
                       {"intended_flags", e.intended_flags},
                       {"hw_mcs", e.hw_mcs},
                       {"hw_flags", e.hw_flags},
                       {"retry_count", e.retry_count},
                       {"outcome_flags", e.outcome_flags},
                       {"rssi", e.rssi},
                       {"frame_length", e.frame_length},
                       {"reserved", e.reserved}};
}

void from_json(const nlohmann::json& j, TelemetryEntry& e)
{
    j.at("seq").get_to(e.seq);
    j.at("timestamp_us").get_to(e.timestamp_us);
    j.at("wcid").get_to(e.wcid);
    j.at("intended_mcs").get_to(e.intended_mcs);
    j.at("intended_flags").get_to(e.intended_flags);
    j.at("hw_mcs").get_to(e.hw_mcs);
    j.at("hw_flags").get_to(e.hw_flags);
    j.at("retry_count").get_to(e.retry_count);
    j.at("outcome_flags").get_to(e.outcome_flags);
    j.at("rssi").get_to(e.rssi);
    j.at("frame_length").get_to(e.frame_length);
    e.reserved = j.value("reserved", std::uint16_t{0});
}

TelemetryRing::TelemetryRing(std::size_t capacity) : storage_(capacity)
{
    if (capacity == 0) {
        throw std::invalid_argument("telemetry ring capacity must be positive");
    }
}

std::uint32_t TelemetryRing::record(TelemetryEntry entry)
{
    std::lock_guard lock(mu_);
    entry.seq = next_seq_++;
    storage_[head_ % storage_.size()] = entry;
    ++head_;
    if (head_ - tail_ > storage_.size()) {
        const std::uint64_t new_tail = head_ - storage_.size();
        dropped_ += new_tail - tail_;
        tail_ = new_tail;
    }
    return entry.seq;
}

std::vector<TelemetryEntry> TelemetryRing::snapshot_read()
{
    std::lock_guard lock(mu_);
    const std::size_t cap = storage_.size();
    const std::size_t count = static_cast<std::size_t>(head_ - tail_);
    std::vector<TelemetryEntry> out(count);
    const std::size_t start = static_cast<std::size_t>(tail_ % cap);
    // At most two contiguous segments: [start, cap) then [0, rest).
    const std::size_t first = std::min(count, cap - start);
    std::copy_n(storage_.begin() + static_cast<std::ptrdiff_t>(start), first, out.begin());
    std::copy_n(storage_.begin(), count - first, out.begin() + static_cast<std::ptrdiff_t>(first));
    tail_ = head_;
    return out;
}

std::uint64_t TelemetryRing::head() const
{
    std::lock_guard lock(mu_);
    return head_;
}

std::uint64_t TelemetryRing::tail() const
{
    std::lock_guard lock(mu_);
    return tail_;
}

std::uint64_t TelemetryRing::dropped() const
{
    std::lock_guard lock(mu_);
    return dropped_;
}

std::map<std::uint8_t, StationAggregate> aggregate_stats(std::span<const TelemetryEntry> entries)
{
    struct Acc {
        StationAggregate agg;
        double rssi_sum = 0.0;
        std::uint64_t fallbacks = 0;
    };
    std::map<std::uint8_t, Acc> acc;
    for (const TelemetryEntry& e : entries) {
        Acc& a = acc[e.wcid];
        ++a.agg.frames;
        ++a.agg.retry_histogram[e.retry_count];
        a.rssi_sum += e.rssi;
        if (e.success()) {
            ++a.agg.delivered;
            if (e.fell_back()) {
                ++a.fallbacks;
            }
        }
    }
    std::map<std::uint8_t, StationAggregate> out;
    for (auto& [wcid, a] : acc) {
        StationAggregate agg = std::move(a.agg);
        agg.delivery_ratio = static_cast<double>(agg.delivered) / static_cast<double>(agg.frames);
        agg.mean_rssi = a.rssi_sum / static_cast<double>(agg.frames);
        agg.hw_fallback_fraction =
            agg.delivered == 0 ? 0.0 : static_cast<double>(a.fallbacks) / static_cast<double>(agg.delivered);
        out.emplace(wcid, std::move(agg));
    }
    return out;
}

void to_json(nlohmann::json& j, const StationAggregate& a)
{
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [retries, n] : a.retry_histogram) {
        hist[std::to_string(retries)] = n;
    }
    j = nlohmann::json{{"frames", a.frames},
                       {"delivered", a.delivered},
                       {"delivery_ratio", a.delivery_ratio},
                       {"retry_histogram", hist},
                       {"mean_rssi", a.mean_rssi},
                       {"hw_fallback_fraction", a.hw_fallback_fraction}};
}

}  // namespace rclab::telemetry

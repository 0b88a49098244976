#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include <json.hpp>

namespace rclab::telemetry {

inline constexpr std::uint8_t kOutcomeSuccess = 0x01;
inline constexpr std::uint8_t kOutcomeAggregate = 0x02;

/// Packed 20-byte per-frame record:
///   u32 seq | u32 timestamp_us | u8 wcid | u8 intended_mcs | u8 intended_flags |
///   u8 hw_mcs | u8 hw_flags | u8 retry_count | u8 outcome_flags | i8 rssi |
///   u16 frame_length | u16 reserved
struct TelemetryEntry {
    static constexpr std::size_t kSize = 20;

    std::uint32_t seq = 0;
    std::uint32_t timestamp_us = 0;
    std::uint8_t wcid = 0;
    std::uint8_t intended_mcs = 0;
    std::uint8_t intended_flags = 0;
    std::uint8_t hw_mcs = 0;
    std::uint8_t hw_flags = 0;
    std::uint8_t retry_count = 0;
    std::uint8_t outcome_flags = 0;
    std::int8_t rssi = 0;
    std::uint16_t frame_length = 0;
    std::uint16_t reserved = 0;

    bool success() const { return (outcome_flags & kOutcomeSuccess) != 0; }
    bool aggregate() const { return (outcome_flags & kOutcomeAggregate) != 0; }
    /// Delivered at a rate other than the intended HT rate.
    bool fell_back() const;

    std::array<std::byte, kSize> encode() const;
    static TelemetryEntry decode(std::span<const std::byte> bytes);

    friend bool operator==(const TelemetryEntry&, const TelemetryEntry&) = default;
};

void to_json(nlohmann::json& j, const TelemetryEntry& e);
void from_json(const nlohmann::json& j, TelemetryEntry& e);

/// Fixed-capacity ring with overwrite-oldest semantics. One datapath writer
/// and one control-plane reader; the head/tail pair is guarded so a snapshot
/// sees a consistent window.
class TelemetryRing {
public:
    static constexpr std::size_t kDefaultCapacity = 4096;

    explicit TelemetryRing(std::size_t capacity = kDefaultCapacity);

    /// Stores `entry` with the next sequence number; returns the seq assigned.
    std::uint32_t record(TelemetryEntry entry);

    /// Copies [tail, head) in order and advances tail to head.
    std::vector<TelemetryEntry> snapshot_read();

    std::size_t capacity() const { return storage_.size(); }
    std::uint64_t head() const;
    std::uint64_t tail() const;
    /// Entries overwritten before any snapshot read them.
    std::uint64_t dropped() const;

private:
    mutable std::mutex mu_;
    std::vector<TelemetryEntry> storage_;
    std::uint64_t head_ = 0;
    std::uint64_t tail_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint32_t next_seq_ = 0;
};

struct StationAggregate {
    std::uint64_t frames = 0;
    std::uint64_t delivered = 0;
    double delivery_ratio = 0.0;
    std::map<std::uint32_t, std::uint64_t> retry_histogram;
    double mean_rssi = 0.0;
    /// Fraction of successful frames delivered off the intended HT rate.
    double hw_fallback_fraction = 0.0;

    friend bool operator==(const StationAggregate&, const StationAggregate&) = default;
};

std::map<std::uint8_t, StationAggregate> aggregate_stats(std::span<const TelemetryEntry> entries);

void to_json(nlohmann::json& j, const StationAggregate& a);

}  // namespace rclab::telemetry

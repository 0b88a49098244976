#pragma once

// Binary records shared between the datapath and rate controllers. All
// layouts are little-endian and fixed-size.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "rclab/phy/channel.hpp"

namespace rclab {

inline constexpr std::size_t kMaxStations = 128;  // map entries, wcid 1..127 live

inline bool valid_wcid(std::uint64_t wcid) { return wcid != 0 && wcid < kMaxStations; }

/// Rate map value: mcs, streams, bandwidth, guard, phy_mode, valid, 2 pad bytes.
struct RateMapEntry {
    static constexpr std::size_t kSize = 8;

    std::uint8_t mcs = 0;
    std::uint8_t streams = 1;
    std::uint8_t bandwidth = 0;
    std::uint8_t guard = 0;
    std::uint8_t phy_mode = 0;
    std::uint8_t valid = 0;

    static RateMapEntry from_rate(const phy::RateSpec& rate);
    /// Throws std::invalid_argument if the fields do not form a valid rate.
    phy::RateSpec to_rate() const;

    std::array<std::byte, kSize> encode() const;
    static RateMapEntry decode(std::span<const std::byte> bytes);

    friend bool operator==(const RateMapEntry&, const RateMapEntry&) = default;
};

/// Stats map value. Field order: tx_total, tx_success, tx_retries (u64);
/// ewma_per per-mille, signal, ack_signal, last_mcs, flush_count (32-bit);
/// 4 trailing pad bytes to keep the record 8-byte aligned at 48 bytes.
struct StatsEntry {
    static constexpr std::size_t kSize = 48;

    std::uint64_t tx_total = 0;
    std::uint64_t tx_success = 0;
    std::uint64_t tx_retries = 0;
    std::uint32_t ewma_per = 0;
    std::int32_t signal = 0;
    std::int32_t ack_signal = 0;
    std::uint32_t last_mcs = 0;
    std::uint32_t flush_count = 0;

    std::array<std::byte, kSize> encode() const;
    static StatsEntry decode(std::span<const std::byte> bytes);

    friend bool operator==(const StatsEntry&, const StatsEntry&) = default;
};

/// Per-frame completion context handed to controllers: 15 u64 slots.
struct TxStatusContext {
    static constexpr std::size_t kFieldCount = 15;
    static constexpr std::size_t kSize = kFieldCount * 8;

    enum Field : std::size_t {
        Wcid,
        Success,
        McsUsed,
        RetryCount,
        EwmaPer,
        TxTotal,
        TxSuccess,
        TxRetries,
        Signal,
        AckSignal,
        FrameLength,
        TimestampNs,
        HwMcsUsed,
        IsAggregate,
        HwRateFlags,
    };

    std::uint64_t wcid = 0;
    std::uint64_t success = 0;
    std::uint64_t mcs_used = 0;
    std::uint64_t retry_count = 0;
    std::uint64_t ewma_per = 0;
    std::uint64_t tx_total = 0;
    std::uint64_t tx_success = 0;
    std::uint64_t tx_retries = 0;
    std::int64_t signal = 0;
    std::int64_t ack_signal = 0;
    std::uint64_t frame_length = 0;
    std::uint64_t timestamp_ns = 0;
    std::uint64_t hw_mcs_used = 0;
    std::uint64_t is_aggregate = 0;
    std::uint64_t hw_rate_flags = 0;

    /// The args-array view controllers index into.
    std::array<std::uint64_t, kFieldCount> args() const;
    static TxStatusContext from_args(std::span<const std::uint64_t, kFieldCount> args);

    std::array<std::byte, kSize> encode() const;
    static TxStatusContext decode(std::span<const std::byte> bytes);

    friend bool operator==(const TxStatusContext&, const TxStatusContext&) = default;
};

/// Field names in slot order, as used by policy programs (`ctx.<name>`).
inline constexpr std::array<const char*, TxStatusContext::kFieldCount> kTxContextFieldNames{
    "wcid",     "success",   "mcs_used",   "retry_count",  "ewma_per",     "tx_total",    "tx_success",  "tx_retries",
    "signal",   "ack_signal", "frame_length", "timestamp_ns", "hw_mcs_used", "is_aggregate", "hw_rate_flags",
};

}  // namespace rclab

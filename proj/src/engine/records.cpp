#include "rclab/engine/records.hpp"

#include <stdexcept>

#include "rclab/util/bytes.hpp"

namespace rclab {

RateMapEntry RateMapEntry::from_rate(const phy::RateSpec& rate)
{
    RateMapEntry e;
    e.mcs = rate.mcs;
    e.streams = rate.streams;
    e.bandwidth = static_cast<std::uint8_t>(rate.bandwidth);
    e.guard = static_cast<std::uint8_t>(rate.guard);
    e.phy_mode = static_cast<std::uint8_t>(rate.phy);
    e.valid = 1;
    return e;
}

phy::RateSpec RateMapEntry::to_rate() const
{
    if (bandwidth > 1 || guard > 1 || phy_mode > 1) {
        throw std::invalid_argument("rate map entry has out-of-range enum fields");
    }
    phy::RateSpec r{mcs, streams, static_cast<phy::Bandwidth>(bandwidth), static_cast<phy::GuardInterval>(guard),
                    static_cast<phy::PhyMode>(phy_mode)};
    phy::validate(r);
    return r;
}

std::array<std::byte, RateMapEntry::kSize> RateMapEntry::encode() const
{
    std::array<std::byte, kSize> out{};
    ByteWriter w(out);
    w.put(mcs);
    w.put(streams);
    w.put(bandwidth);
    w.put(guard);
    w.put(phy_mode);
    w.put(valid);
    w.skip(2);
    return out;
}

RateMapEntry RateMapEntry::decode(std::span<const std::byte> bytes)
{
    require_size(bytes, kSize, "RateMapEntry");
    ByteReader r(bytes);
    RateMapEntry e;
    e.mcs = r.get<std::uint8_t>();
    e.streams = r.get<std::uint8_t>();
    e.bandwidth = r.get<std::uint8_t>();
    e.guard = r.get<std::uint8_t>();
    e.phy_mode = r.get<std::uint8_t>();
    e.valid = r.get<std::uint8_t>();
    return e;
}

std::array<std::byte, StatsEntry::kSize> StatsEntry::encode() const
{
    std::array<std::byte, kSize> out{};
    ByteWriter w(out);
    w.put(tx_total);
    w.put(tx_success);
    w.put(tx_retries);
    w.put(ewma_per);
    w.put(signal);
    w.put(ack_signal);
    w.put(last_mcs);
    w.put(flush_count);
    w.skip(4);
    return out;
}

StatsEntry StatsEntry::decode(std::span<const std::byte> bytes)
{
    require_size(bytes, kSize, "StatsEntry");
    ByteReader r(bytes);
    StatsEntry e;
    e.tx_total = r.get<std::uint64_t>();
    e.tx_success = r.get<std::uint64_t>();
    e.tx_retries = r.get<std::uint64_t>();
    e.ewma_per = r.get<std::uint32_t>();
    e.signal = r.get<std::int32_t>();
    e.ack_signal = r.get<std::int32_t>();
    e.last_mcs = r.get<std::uint32_t>();
    e.flush_count = r.get<std::uint32_t>();
    return e;
}

std::array<std::uint64_t, TxStatusContext::kFieldCount> TxStatusContext::args() const
{
    return {wcid,
            success,
            mcs_used,
            retry_count,
            ewma_per,
            tx_total,
            tx_success,
            tx_retries,
            static_cast<std::uint64_t>(signal),
            static_cast<std::uint64_t>(ack_signal),
            frame_length,
            timestamp_ns,
            hw_mcs_used,
            is_aggregate,
            hw_rate_flags};
}

TxStatusContext TxStatusContext::from_args(std::span<const std::uint64_t, kFieldCount> a)
{
    TxStatusContext c;
    c.wcid = a[Wcid];
    c.success = a[Success];
    c.mcs_used = a[McsUsed];
    c.retry_count = a[RetryCount];
    c.ewma_per = a[EwmaPer];
    c.tx_total = a[TxTotal];
    c.tx_success = a[TxSuccess];
    c.tx_retries = a[TxRetries];
    c.signal = static_cast<std::int64_t>(a[Signal]);
    c.ack_signal = static_cast<std::int64_t>(a[AckSignal]);
    c.frame_length = a[FrameLength];
    c.timestamp_ns = a[TimestampNs];
    c.hw_mcs_used = a[HwMcsUsed];
    c.is_aggregate = a[IsAggregate];
    c.hw_rate_flags = a[HwRateFlags];
    return c;
}

std::array<std::byte, TxStatusContext::kSize> TxStatusContext::encode() const
{
    std::array<std::byte, kSize> out{};
    ByteWriter w(out);
    for (std::uint64_t v : args()) {
        w.put(v);
    }
    return out;
}

TxStatusContext TxStatusContext::decode(std::span<const std::byte> bytes)
{
    require_size(bytes, kSize, "TxStatusContext");
    ByteReader r(bytes);
    std::array<std::uint64_t, kFieldCount> a{};
    for (auto& v : a) {
        v = r.get<std::uint64_t>();
    }
    return from_args(a);
}

}  // namespace rclab

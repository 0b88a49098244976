#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>

#include "rclab/engine/records.hpp"
#include "rclab/util/bytes.hpp"

namespace rclab {

/// Fixed-geometry array map of opaque records. Entry reads and writes are
/// atomic at record granularity.
class ArrayMap {
public:
    explicit ArrayMap(std::size_t value_size, std::size_t max_entries = kMaxStations);

    std::size_t value_size() const { return value_size_; }
    std::size_t max_entries() const { return max_entries_; }

    Bytes read(std::size_t key) const;
    void read_into(std::size_t key, std::span<std::byte> out) const;
    void write(std::size_t key, std::span<const std::byte> value);
    /// Whole-map copy, entries concatenated in key order.
    Bytes dump() const;

private:
    void check_key(std::size_t key) const;

    std::size_t value_size_;
    std::size_t max_entries_;
    mutable std::mutex mu_;
    Bytes data_;
};

/// A published map reference. Readers take a short-lived reference for the
/// duration of one access; swap() publishes a replacement and hands the old
/// map back only once every reference acquired through this slot is gone.
class MapSlot {
public:
    MapSlot(std::size_t value_size, std::size_t max_entries = kMaxStations);

    std::shared_ptr<ArrayMap> acquire() const;

    /// Throws std::invalid_argument when `next` has a different geometry.
    std::shared_ptr<ArrayMap> swap(std::shared_ptr<ArrayMap> next);

    /// Replaces the map unconditionally with a fresh zeroed one of the given
    /// value size. Used when a program with a different state layout is loaded.
    void recreate(std::size_t value_size);

    std::size_t value_size() const;

private:
    struct Published {
        std::shared_ptr<ArrayMap> map;
        std::shared_ptr<std::atomic<std::int64_t>> readers;
    };

    static Published publish(std::shared_ptr<ArrayMap> map);
    static std::shared_ptr<ArrayMap> wait_for_readers(Published old);

    mutable std::mutex mu_;
    Published current_;
};

}  // namespace rclab

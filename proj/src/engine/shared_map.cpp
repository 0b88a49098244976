#include "rclab/engine/shared_map.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <thread>

namespace rclab {

ArrayMap::ArrayMap(std::size_t value_size, std::size_t max_entries)
    : value_size_(value_size), max_entries_(max_entries), data_(value_size * max_entries)
{
}

void ArrayMap::check_key(std::size_t key) const
{
    if (key >= max_entries_) {
        throw std::out_of_range("map key " + std::to_string(key) + " out of range");
    }
}

Bytes ArrayMap::read(std::size_t key) const
{
    Bytes out(value_size_);
    read_into(key, out);
    return out;
}

void ArrayMap::read_into(std::size_t key, std::span<std::byte> out) const
{
    check_key(key);
    require_size(out, value_size_, "map value");
    std::lock_guard lock(mu_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(key * value_size_), value_size_, out.begin());
}

void ArrayMap::write(std::size_t key, std::span<const std::byte> value)
{
    check_key(key);
    require_size(value, value_size_, "map value");
    std::lock_guard lock(mu_);
    std::copy(value.begin(), value.end(), data_.begin() + static_cast<std::ptrdiff_t>(key * value_size_));
}

Bytes ArrayMap::dump() const
{
    std::lock_guard lock(mu_);
    return data_;
}

MapSlot::Published MapSlot::publish(std::shared_ptr<ArrayMap> map)
{
    return {std::move(map), std::make_shared<std::atomic<std::int64_t>>(0)};
}

MapSlot::MapSlot(std::size_t value_size, std::size_t max_entries)
    : current_(publish(std::make_shared<ArrayMap>(value_size, max_entries)))
{
}

std::shared_ptr<ArrayMap> MapSlot::acquire() const
{
    std::lock_guard lock(mu_);
    current_.readers->fetch_add(1);
    // The deleter releases the read-side reference, not the map.
    return {current_.map.get(), [map = current_.map, readers = current_.readers](ArrayMap*) { readers->fetch_sub(1); }};
}

std::size_t MapSlot::value_size() const
{
    std::lock_guard lock(mu_);
    return current_.map->value_size();
}

std::shared_ptr<ArrayMap> MapSlot::swap(std::shared_ptr<ArrayMap> next)
{
    if (!next) {
        throw std::invalid_argument("cannot publish a null map");
    }
    Published old;
    {
        std::lock_guard lock(mu_);
        const ArrayMap& cur = *current_.map;
        if (next->max_entries() != cur.max_entries() || next->value_size() != cur.value_size()) {
            throw std::invalid_argument("map geometry mismatch: expected " + std::to_string(cur.max_entries()) +
                                        " x " + std::to_string(cur.value_size()) + " B, got " +
                                        std::to_string(next->max_entries()) + " x " +
                                        std::to_string(next->value_size()) + " B");
        }
        old = std::exchange(current_, publish(std::move(next)));
    }
    return wait_for_readers(std::move(old));
}

void MapSlot::recreate(std::size_t value_size)
{
    Published old;
    {
        std::lock_guard lock(mu_);
        old = std::exchange(current_, publish(std::make_shared<ArrayMap>(value_size, current_.map->max_entries())));
    }
    wait_for_readers(std::move(old));
}

std::shared_ptr<ArrayMap> MapSlot::wait_for_readers(Published old)
{
    // Grace period: readers that acquired the old map before publication
    // still hold their references.
    while (old.readers->load() > 0) {
        std::this_thread::yield();
    }
    return old.map;
}

}  // namespace rclab

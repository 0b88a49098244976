#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace rclab {

using Bytes = std::vector<std::byte>;

/// Little-endian cursor over a fixed output buffer.
class ByteWriter {
public:
    explicit ByteWriter(std::span<std::byte> out) : out_(out) {}

    template <typename T>
        requires std::is_integral_v<T>
    void put(T value)
    {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_[pos_++] = static_cast<std::byte>(u & 0xFF);
            if constexpr (sizeof(T) > 1) {
                u = static_cast<U>(u >> 8);
            }
        }
    }

    void skip(std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) {
            out_[pos_++] = std::byte{0};
        }
    }

    std::size_t position() const { return pos_; }

private:
    std::span<std::byte> out_;
    std::size_t pos_ = 0;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

    template <typename T>
        requires std::is_integral_v<T>
    T get()
    {
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u = static_cast<U>(u | (static_cast<U>(std::to_integer<std::uint8_t>(in_[pos_++])) << (8 * i)));
        }
        return static_cast<T>(u);
    }

    void skip(std::size_t n) { pos_ += n; }

private:
    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

inline void require_size(std::span<const std::byte> in, std::size_t expected, const char* what)
{
    if (in.size() != expected) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expected) + " bytes, got " +
                                    std::to_string(in.size()));
    }
}

/// Standard base64 (RFC 4648, padded), backed by libsodium.
std::string base64_encode(std::span<const std::byte> data);
/// Throws std::invalid_argument on malformed input.
Bytes base64_decode(const std::string& text);

}  // namespace rclab

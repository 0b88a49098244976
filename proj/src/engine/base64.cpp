#include <sodium.h>

#include "rclab/util/bytes.hpp"

namespace rclab {

std::string base64_encode(std::span<const std::byte> data)
{
    constexpr int variant = sodium_base64_VARIANT_ORIGINAL;
    std::string out(sodium_base64_encoded_len(data.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(data.data()), data.size(),
                      variant);
    out.resize(out.size() - 1);  // drop the terminating NUL
    return out;
}

Bytes base64_decode(const std::string& text)
{
    Bytes out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(),
                          nullptr, &len, &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw std::invalid_argument("malformed base64");
    }
    out.resize(len);
    return out;
}

}  // namespace rclab

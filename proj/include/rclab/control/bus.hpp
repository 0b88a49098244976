#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace rclab::control {

/// MQTT-style filter match: '+' matches one level, a trailing '#' matches
/// any remainder (including none).
bool topic_matches(const std::string& filter, const std::string& topic);

/// In-process publish/subscribe bus. Delivery is synchronous on the
/// publisher's thread, in subscription order.
class Bus {
public:
    using Handler = std::function<void(const std::string& topic, const nlohmann::json& message)>;

    std::uint64_t subscribe(std::string filter, Handler handler);
    void unsubscribe(std::uint64_t id);
    /// Returns the number of handlers the message reached.
    std::size_t publish(const std::string& topic, const nlohmann::json& message);

private:
    struct Sub {
        std::uint64_t id;
        std::string filter;
        std::shared_ptr<Handler> handler;
    };
    std::mutex mu_;
    std::vector<Sub> subs_;
    std::uint64_t next_id_ = 1;
};

}  // namespace rclab::control

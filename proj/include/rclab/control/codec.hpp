#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/engine/records.hpp"

namespace rclab::control {

/// A payload field is missing or has the wrong shape.
class PayloadError : public std::invalid_argument {
public:
    PayloadError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// {"mcs": 4, "phy": "ht"|"legacy", "bandwidth": "ht20"|"ht40",
///  "guard": "long"|"short", "streams": 1}; all but mcs optional.
nlohmann::json rate_to_json(const RateSpec& rate);
RateSpec rate_from_json(const nlohmann::json& j, const std::string& field = "rate");

/// {"mode": "fixed"|"per-station"|"round-robin"|"frame-type"|"program", ...}
nlohmann::json policy_to_json(const PolicyMode& mode);
PolicyMode policy_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const StatsEntry& s);
nlohmann::json rate_entry_to_json(const RateMapEntry& e);

/// Reads a required field, converting nlohmann type errors into PayloadError.
template <typename T>
T required(const nlohmann::json& j, const std::string& key)
{
    if (!j.is_object() || !j.contains(key)) throw PayloadError(key, "required field missing");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw PayloadError(key, "wrong type");
    }
}

template <typename T>
T optional_field(const nlohmann::json& j, const std::string& key, T fallback)
{
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw PayloadError(key, "wrong type");
    }
}

}  // namespace rclab::control

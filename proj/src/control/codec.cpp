#include "rclab/control/codec.hpp"

namespace rclab::control {

nlohmann::json rate_to_json(const RateSpec& rate)
{
    return {{"mcs", rate.mcs},
            {"phy", rate.is_legacy() ? "legacy" : "ht"},
            {"bandwidth", rate.bandwidth == phy::Bandwidth::HT40 ? "ht40" : "ht20"},
            {"guard", rate.guard == phy::GuardInterval::Short ? "short" : "long"},
            {"streams", rate.streams}};
}

RateSpec rate_from_json(const nlohmann::json& j, const std::string& field)
{
    if (j.is_number_integer()) {
        const auto m = j.get<std::int64_t>();
        if (m < 0 || m >= phy::kMcsCount) throw PayloadError(field, "mcs must be 0..7");
        return RateSpec::ht(static_cast<std::uint8_t>(m));
    }
    if (!j.is_object()) throw PayloadError(field, "expected a rate object or an MCS index");
    const auto m = required<std::int64_t>(j, "mcs");
    if (m < 0 || m >= phy::kMcsCount) throw PayloadError(field + ".mcs", "must be 0..7");
    RateSpec r = RateSpec::ht(static_cast<std::uint8_t>(m));
    const auto phy = optional_field<std::string>(j, "phy", "ht");
    if (phy == "legacy") {
        r.phy = phy::PhyMode::LegacyOfdm;
    } else if (phy != "ht") {
        throw PayloadError(field + ".phy", "expected 'ht' or 'legacy'");
    }
    const auto bw = optional_field<std::string>(j, "bandwidth", "ht20");
    if (bw == "ht40") {
        r.bandwidth = phy::Bandwidth::HT40;
    } else if (bw != "ht20") {
        throw PayloadError(field + ".bandwidth", "expected 'ht20' or 'ht40'");
    }
    const auto gi = optional_field<std::string>(j, "guard", "long");
    if (gi == "short") {
        r.guard = phy::GuardInterval::Short;
    } else if (gi != "long") {
        throw PayloadError(field + ".guard", "expected 'long' or 'short'");
    }
    r.streams = static_cast<std::uint8_t>(optional_field<int>(j, "streams", 1));
    try {
        phy::validate(r);
    } catch (const std::invalid_argument& e) {
        throw PayloadError(field, e.what());
    }
    return r;
}

nlohmann::json policy_to_json(const PolicyMode& mode)
{
    return std::visit(
        [](const auto& m) -> nlohmann::json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FixedPolicy>) {
                return {{"mode", "fixed"}, {"rate", rate_to_json(m.rate)}};
            } else if constexpr (std::is_same_v<T, PerStationPolicy>) {
                nlohmann::json o = nlohmann::json::object();
                for (const auto& [wcid, r] : m.overrides) o[std::to_string(wcid)] = rate_to_json(r);
                return {{"mode", "per-station"}, {"overrides", o}, {"fallback", rate_to_json(m.fallback)}};
            } else if constexpr (std::is_same_v<T, RoundRobinPolicy>) {
                nlohmann::json rates = nlohmann::json::array();
                for (const auto& r : m.rates) rates.push_back(rate_to_json(r));
                return {{"mode", "round-robin"}, {"rates", rates}, {"frames_per_rate", m.frames_per_rate}};
            } else if constexpr (std::is_same_v<T, FrameTypePolicy>) {
                return {{"mode", "frame-type"},
                        {"mgmt", rate_to_json(m.mgmt)},
                        {"ctrl", rate_to_json(m.ctrl)},
                        {"data", rate_to_json(m.data)}};
            } else {
                return {{"mode", "program"}, {"policy_id", m.policy_id}};
            }
        },
        mode);
}

PolicyMode policy_from_json(const nlohmann::json& j)
{
    const auto mode = required<std::string>(j, "mode");
    PolicyMode out;
    if (mode == "fixed") {
        if (j.contains("rate")) {
            out = FixedPolicy{rate_from_json(j.at("rate"), "rate")};
        } else {
            out = FixedPolicy{rate_from_json(j, "mcs")};
        }
    } else if (mode == "per-station") {
        PerStationPolicy p;
        if (j.contains("fallback")) p.fallback = rate_from_json(j.at("fallback"), "fallback");
        const auto& o = j.contains("overrides") ? j.at("overrides") : nlohmann::json::object();
        if (!o.is_object()) throw PayloadError("overrides", "expected an object keyed by wcid");
        for (const auto& [k, v] : o.items()) {
            int wcid = 0;
            try {
                wcid = std::stoi(k);
            } catch (const std::exception&) {
                throw PayloadError("overrides." + k, "key must be a wcid");
            }
            if (!valid_wcid(static_cast<std::uint64_t>(wcid))) throw PayloadError("overrides." + k, "wcid must be 1..127");
            p.overrides[static_cast<std::uint8_t>(wcid)] = rate_from_json(v, "overrides." + k);
        }
        out = p;
    } else if (mode == "round-robin") {
        RoundRobinPolicy p;
        if (j.contains("rates")) {
            const auto& rs = j.at("rates");
            if (!rs.is_array()) throw PayloadError("rates", "expected an array");
            for (std::size_t i = 0; i < rs.size(); ++i) p.rates.push_back(rate_from_json(rs[i], "rates." + std::to_string(i)));
        } else {
            for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) p.rates.push_back(RateSpec::ht(m));
        }
        p.frames_per_rate = optional_field<std::uint32_t>(j, "frames_per_rate", 1);
        out = p;
    } else if (mode == "frame-type") {
        FrameTypePolicy p;
        if (j.contains("mgmt")) p.mgmt = rate_from_json(j.at("mgmt"), "mgmt");
        if (j.contains("ctrl")) p.ctrl = rate_from_json(j.at("ctrl"), "ctrl");
        if (j.contains("data")) p.data = rate_from_json(j.at("data"), "data");
        out = p;
    } else if (mode == "program") {
        out = ProgramPolicy{required<std::string>(j, "policy_id")};
    } else {
        throw PayloadError("mode", "unknown policy mode '" + mode + "'");
    }
    try {
        validate(out);
    } catch (const std::invalid_argument& e) {
        throw PayloadError("mode", e.what());
    }
    return out;
}

nlohmann::json stats_to_json(const StatsEntry& s)
{
    return {{"tx_total", s.tx_total},   {"tx_success", s.tx_success}, {"tx_retries", s.tx_retries},
            {"ewma_per", s.ewma_per},   {"signal", s.signal},         {"ack_signal", s.ack_signal},
            {"last_mcs", s.last_mcs},   {"flush_count", s.flush_count}};
}

nlohmann::json rate_entry_to_json(const RateMapEntry& e)
{
    return {{"mcs", e.mcs},           {"streams", e.streams}, {"bandwidth", e.bandwidth},
            {"guard", e.guard},       {"phy_mode", e.phy_mode}, {"valid", e.valid != 0}};
}

}  // namespace rclab::control

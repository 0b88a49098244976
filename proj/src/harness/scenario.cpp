#include "rclab/harness/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rclab::harness {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& msg)
{
    throw std::invalid_argument("scenario." + field + ": " + msg);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& path)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        bad(path + key, "wrong type");
    }
}

phy::RssiTrace::Kind trace_from_json(const json& t, std::uint64_t trace_seed)
{
    if (!t.is_object()) bad("channel.trace", "expected an object");
    const auto kind = get_or<std::string>(t, "kind", "constant", "channel.trace.");
    const std::string p = "channel.trace.";
    if (kind == "constant") {
        return phy::ConstantTrace{get_or(t, "rssi_dbm", -65.0, p)};
    }
    if (kind == "linear") {
        return phy::LinearDriftTrace{get_or(t, "start_dbm", -60.0, p), get_or(t, "slope_db_per_s", 0.0, p)};
    }
    if (kind == "sinusoid") {
        phy::SinusoidTrace s;
        s.mean_dbm = get_or(t, "mean_dbm", s.mean_dbm, p);
        s.amplitude_db = get_or(t, "amplitude_db", s.amplitude_db, p);
        s.period_s = get_or(t, "period_s", s.period_s, p);
        s.phase_rad = get_or(t, "phase_rad", s.phase_rad, p);
        if (!(s.period_s > 0.0)) bad("channel.trace.period_s", "must be positive");
        return s;
    }
    if (kind == "random_walk") {
        phy::RandomWalkTrace w;
        w.start_dbm = get_or(t, "start_dbm", w.start_dbm, p);
        w.step_db = get_or(t, "step_db", w.step_db, p);
        w.step_interval_s = get_or(t, "step_interval_s", w.step_interval_s, p);
        w.horizon_s = get_or(t, "horizon_s", w.horizon_s, p);
        w.min_dbm = get_or(t, "min_dbm", w.min_dbm, p);
        w.max_dbm = get_or(t, "max_dbm", w.max_dbm, p);
        w.event_probability = get_or(t, "event_probability", w.event_probability, p);
        w.event_depth_db = get_or(t, "event_depth_db", w.event_depth_db, p);
        w.event_duration_s = get_or(t, "event_duration_s", w.event_duration_s, p);
        w.seed = get_or<std::uint64_t>(t, "seed", trace_seed, p);
        return w;
    }
    bad("channel.trace.kind", "unknown trace kind '" + kind + "'");
}

}  // namespace

phy::ChannelModel Scenario::build_channel(std::uint64_t trace_seed) const
{
    const json& c = channel;
    auto model = phy::ChannelModel::standard(phy::RssiTrace(trace_from_json(c.value("trace", json::object()), trace_seed)), trace_seed);
    model = model.shifted(get_or(c, "offset_db", 0.0, "channel."));
    model.width_db = get_or(c, "width_db", model.width_db, "channel.");
    phy::validate(model);
    return model;
}

workloads::LinkConfig Scenario::link_config(std::uint64_t trace_seed) const
{
    workloads::LinkConfig l;
    l.channel = build_channel(trace_seed);
    l.retry_limit = retry_limit;
    l.wcid = wcid;
    return l;
}

workloads::WorkloadSpec workload_from_json(const json& j, double default_cap_s)
{
    workloads::WorkloadSpec w;
    try {
        if (j.is_string()) {
            w = workloads::WorkloadSpec::defaults(workloads::workload_kind_from_string(j.get<std::string>()));
            w.time_cap_s = default_cap_s;
            return w;
        }
        if (!j.is_object() || !j.contains("kind")) bad("workloads", "entry must be a kind name or an object with 'kind'");
        w = workloads::WorkloadSpec::defaults(workloads::workload_kind_from_string(j.at("kind").get<std::string>()));
    } catch (const json::exception&) {
        bad("workloads", "kind must be a string");
    }
    w.time_cap_s = default_cap_s;
    const std::string p = "workloads.";
    w.duration_s = get_or(j, "duration_s", w.duration_s, p);
    w.burst_bytes = get_or(j, "burst_bytes", w.burst_bytes, p);
    w.repeats = get_or(j, "repeats", w.repeats, p);
    w.packet_bytes = get_or(j, "packet_bytes", w.packet_bytes, p);
    w.packet_interval_s = get_or(j, "packet_interval_s", w.packet_interval_s, p);
    w.segment_play_s = get_or(j, "segment_play_s", w.segment_play_s, p);
    w.time_cap_s = get_or(j, "time_cap_s", w.time_cap_s, p);
    w.validate();
    return w;
}

json workload_to_json(const workloads::WorkloadSpec& w)
{
    return {{"kind", workloads::to_string(w.kind)},   {"duration_s", w.duration_s},
            {"burst_bytes", w.burst_bytes},           {"repeats", w.repeats},
            {"packet_bytes", w.packet_bytes},         {"packet_interval_s", w.packet_interval_s},
            {"segment_play_s", w.segment_play_s},     {"time_cap_s", w.time_cap_s}};
}

Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object()) bad("", "expected a JSON object");
    Scenario s;
    s.base_dir = base_dir;
    s.name = get_or<std::string>(j, "name", s.name, "");
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed, "");
    if (j.contains("channel")) s.channel = j.at("channel");
    if (j.contains("link")) {
        const json& l = j.at("link");
        s.retry_limit = get_or(l, "retry_limit", s.retry_limit, "link.");
        const int w = get_or(l, "wcid", 1, "link.");
        if (!valid_wcid(static_cast<std::uint64_t>(w))) bad("link.wcid", "must be 1..127");
        s.wcid = static_cast<std::uint8_t>(w);
        s.transport.payload_bytes = get_or(l, "payload_bytes", s.transport.payload_bytes, "link.");
        s.transport.queue_capacity = get_or(l, "queue_capacity", s.transport.queue_capacity, "link.");
        if (s.retry_limit < 0 || s.retry_limit > 15) bad("link.retry_limit", "must be 0..15");
        if (s.transport.payload_bytes == 0 || s.transport.payload_bytes > 65535) bad("link.payload_bytes", "must be 1..65535");
        if (s.transport.queue_capacity == 0) bad("link.queue_capacity", "must be positive");
    }
    s.pairs = get_or(j, "pairs", s.pairs, "");
    s.sample_duration_s = get_or(j, "sample_duration_s", s.sample_duration_s, "");
    if (!(s.sample_duration_s > 0.0)) bad("sample_duration_s", "must be positive");
    if (j.contains("workloads")) {
        if (!j.at("workloads").is_array()) bad("workloads", "expected an array");
        for (const auto& w : j.at("workloads")) s.workloads.push_back(workload_from_json(w, s.sample_duration_s));
    } else {
        for (auto k : workloads::all_workload_kinds()) s.workloads.push_back(workload_from_json(workloads::to_string(k), s.sample_duration_s));
    }
    if (j.contains("algorithms")) {
        s.algorithms = get_or<std::vector<std::string>>(j, "algorithms", {}, "");
    } else {
        s.algorithms = {"minstrel", "iterate3"};
    }
    if (s.pairs < 1) bad("pairs", "must be at least 1");
    if (s.workloads.empty()) bad("workloads", "must not be empty");
    if (s.algorithms.empty()) bad("algorithms", "must not be empty");
    s.build_channel(s.seed);  // validate now
    return s;
}

json scenario_to_json(const Scenario& s)
{
    json w = json::array();
    for (const auto& spec : s.workloads) w.push_back(workload_to_json(spec));
    return {{"name", s.name},
            {"seed", s.seed},
            {"channel", s.channel},
            {"link",
             {{"retry_limit", s.retry_limit},
              {"wcid", s.wcid},
              {"payload_bytes", s.transport.payload_bytes},
              {"queue_capacity", s.transport.queue_capacity}}},
            {"workloads", w},
            {"algorithms", s.algorithms},
            {"pairs", s.pairs},
            {"sample_duration_s", s.sample_duration_s}};
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return scenario_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

Scenario default_scenario()
{
    return scenario_from_json({{"name", "default"},
                               {"seed", 1},
                               {"channel", {{"trace", {{"kind", "random_walk"}, {"start_dbm", -72.0}, {"min_dbm", -85.0}, {"max_dbm", -55.0}}}}},
                               {"algorithms", {"minstrel", "iterate3"}}});
}

}  // namespace rclab::harness

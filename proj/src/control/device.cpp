#include "rclab/control/device.hpp"

#include <algorithm>
#include <cmath>

#include "rclab/control/codec.hpp"
#include "rclab/controllers/registry.hpp"
#include "rclab/script/interpreter.hpp"
#include "rclab/util/bytes.hpp"

namespace rclab::control {

using nlohmann::json;

namespace {

const std::vector<std::string> kOutbound = {"ack", "telemetry", "stats", "workload"};

phy::SimTime seconds_to_time(double s)
{
    return std::chrono::duration_cast<phy::SimTime>(std::chrono::duration<double>(s));
}

double time_to_seconds(phy::SimTime t) { return std::chrono::duration<double>(t).count(); }

std::string number_text(double v) { return json(v).dump(); }

double positive_interval(const json& payload, const std::string& key, double fallback)
{
    const double v = optional_field<double>(payload, key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw PayloadError(key, "must be a positive number of seconds");
    return v;
}

std::uint8_t wcid_field(const json& payload, const std::string& key = "wcid")
{
    const auto w = required<std::int64_t>(payload, key);
    if (!valid_wcid(static_cast<std::uint64_t>(w)) || w < 0) throw PayloadError(key, "must be 1..127");
    return static_cast<std::uint8_t>(w);
}

json error_json(const std::string& code, const std::string& message)
{
    return {{"code", code}, {"message", message}};
}

/// A deploy stage failed; `error` is the full structured error.
struct StageFailure : std::runtime_error {
    explicit StageFailure(json e) : std::runtime_error(e.value("message", "")), error(std::move(e)) {}
    json error;
};

}  // namespace

void to_json(json& j, const Ack& a)
{
    j = {{"correlation_id", a.correlation_id}, {"ok", a.ok}};
    if (a.ok) {
        j["result"] = a.result;
    } else {
        j["error"] = a.error;
    }
    if (a.verifier_log) j["verifier_log"] = *a.verifier_log;
}

void from_json(const json& j, Ack& a)
{
    a.correlation_id = j.value("correlation_id", "");
    a.ok = j.value("ok", false);
    a.result = j.contains("result") ? j.at("result") : json();
    a.error = j.contains("error") ? j.at("error") : json();
    if (j.contains("verifier_log")) a.verifier_log = j.at("verifier_log").get<std::string>();
}

const std::vector<std::string>& Device::verbs()
{
    static const std::vector<std::string> v = {
        "set-policy",       "set-rate",       "write-rate-map", "read-map",        "deploy-policy",
        "detach-policy",    "enable-telemetry", "disable-telemetry", "get-stats",   "config-set",
        "config-revert",    "config-persist", "start-workload", "stop-workload",   "session-teardown"};
    return v;
}

Device::Device(Bus& bus, DeviceOptions options)
    : bus_(bus),
      options_(std::move(options)),
      telemetry_interval_s_(options_.telemetry_interval_s),
      stats_interval_s_(options_.stats_interval_s)
{
    if (options_.name.empty() || options_.name.find_first_of("/+#") != std::string::npos) {
        throw std::invalid_argument("device name must be non-empty and free of '/', '+' and '#'");
    }
    if (!(telemetry_interval_s_ > 0.0) || !(stats_interval_s_ > 0.0)) {
        throw std::invalid_argument("stream intervals must be positive");
    }
    sub_id_ = bus_.subscribe(topic("+"), [this](const std::string& t, const json& msg) {
        const std::string leaf = t.substr(t.rfind('/') + 1);
        if (std::find(kOutbound.begin(), kOutbound.end(), leaf) != kOutbound.end()) return;
        Ack ack;
        if (!msg.is_object()) {
            ack.error = error_json("bad-payload", "command message must be a JSON object");
        } else {
            Command cmd;
            cmd.topic = t;
            cmd.correlation_id = msg.value("correlation_id", "");
            cmd.payload = msg.contains("payload") ? msg.at("payload") : json::object();
            ack = handle_command(cmd);
        }
        bus_.publish(topic("ack"), ack);
    });
}

Device::~Device()
{
    bus_.unsubscribe(sub_id_);
    stop_ = true;
    std::lock_guard lock(wl_mu_);
    if (worker_.joinable()) worker_.join();
}

Ack Device::handle_command(const Command& cmd)
{
    Ack ack;
    ack.correlation_id = cmd.correlation_id;
    const std::string prefix = "rc/" + options_.name + "/";
    const std::string verb = cmd.topic.rfind(prefix, 0) == 0 ? cmd.topic.substr(prefix.size()) : std::string();
    if (verb.empty() || std::find(verbs().begin(), verbs().end(), verb) == verbs().end()) {
        ack.error = error_json("unknown-topic", "no handler for topic '" + cmd.topic + "'");
        return ack;
    }
    std::vector<Outgoing> out;
    const Ack r = dispatch(verb, cmd.payload, out);
    flush(out);
    ack.ok = r.ok;
    ack.result = r.result;
    ack.error = r.error;
    ack.verifier_log = r.verifier_log;
    return ack;
}

Ack Device::dispatch(const std::string& verb, const json& payload, std::vector<Outgoing>& out)
{
    (void)out;
    Ack ack;
    try {
        if (!payload.is_object()) throw PayloadError("payload", "must be a JSON object");

        // Workload verbs manage the worker thread and must not hold mu_
        // while joining it.
        if (verb == "start-workload") {
            std::lock_guard wl(wl_mu_);
            ack.result = start_workload(payload);
        } else if (verb == "stop-workload") {
            std::lock_guard wl(wl_mu_);
            ack.result = stop_workload();
        } else if (verb == "session-teardown") {
            std::lock_guard wl(wl_mu_);
            const json stopped = stop_workload();
            std::lock_guard lock(mu_);
            const std::size_t persisted = undo_.persisted_count();
            const auto entries = undo_.take_for_teardown();
            // Reverse replay leaves each key at its earliest recorded prior;
            // apply those directly, program before policy.
            std::map<std::string, std::optional<std::string>> finals;
            for (const auto& e : entries) finals[e.key] = e.prior;
            if (auto it = finals.find("program"); it != finals.end()) apply_key(it->first, it->second);
            for (const auto& [k, v] : finals) {
                if (k != "program") apply_key(k, v);
            }
            ack.result = {{"reverted", entries.size()},
                          {"skipped_persisted", persisted},
                          {"session_id", undo_.session_id()},
                          {"workload_stopped", stopped.value("stopped", false)}};
        } else {
            std::lock_guard lock(mu_);
            if (verb == "set-policy") {
                const PolicyMode mode = policy_from_json(payload);
                mutate("policy", policy_to_json(mode).dump());
                ack.result = {{"policy", policy_to_json(engine_.policy())}, {"rate_generation", engine_.rate_generation()}};
            } else if (verb == "set-rate") {
                const RateSpec rate = rate_from_json(payload.contains("rate") ? payload.at("rate") : payload, "rate");
                PolicyMode mode = FixedPolicy{rate};
                if (payload.contains("wcid")) {
                    const auto w = wcid_field(payload);
                    PerStationPolicy p;
                    if (const auto* cur = std::get_if<PerStationPolicy>(&engine_.policy())) {
                        p = *cur;
                    } else if (const auto* fixed = std::get_if<FixedPolicy>(&engine_.policy())) {
                        p.fallback = fixed->rate;
                    }
                    p.overrides[w] = rate;
                    mode = p;
                }
                mutate("policy", policy_to_json(mode).dump());
                ack.result = {{"policy", policy_to_json(engine_.policy())}};
            } else if (verb == "write-rate-map") {
                const auto w = wcid_field(payload);
                RateMapEntry e{};
                if (!optional_field<bool>(payload, "clear", false)) {
                    if (!payload.contains("rate")) throw PayloadError("rate", "required field missing");
                    e = RateMapEntry::from_rate(rate_from_json(payload.at("rate"), "rate"));
                } else {
                    e = RateMapEntry::decode(std::array<std::byte, RateMapEntry::kSize>{});
                }
                const auto bytes = e.encode();
                const bool zero = std::all_of(bytes.begin(), bytes.end(), [](std::byte b) { return b == std::byte{0}; });
                mutate("ratemap." + std::to_string(w), zero ? std::nullopt : std::optional(base64_encode(bytes)));
                ack.result = {{"wcid", w}, {"entry", rate_entry_to_json(engine_.read_rate_map(w))}};
            } else if (verb == "read-map") {
                const auto map = required<std::string>(payload, "map");
                const auto w = wcid_field(payload);
                if (map == "rate") {
                    const auto e = engine_.read_rate_map(w);
                    ack.result = {{"map", map}, {"wcid", w}, {"entry", rate_entry_to_json(e)}, {"raw", base64_encode(e.encode())}};
                } else if (map == "stats") {
                    const auto e = engine_.read_stats(w);
                    ack.result = {{"map", map}, {"wcid", w}, {"entry", stats_to_json(e)}, {"raw", base64_encode(e.encode())}};
                } else if (map == "algo") {
                    const Bytes raw = engine_.read_algo(w);
                    ack.result = {{"map", map}, {"wcid", w}, {"size", raw.size()}, {"raw", base64_encode(raw)}};
                } else {
                    throw PayloadError("map", "expected 'rate', 'stats' or 'algo'");
                }
            } else if (verb == "deploy-policy") {
                ack.result = deploy(payload, ack);
            } else if (verb == "detach-policy") {
                const std::string was = engine_.program_id();
                if (std::holds_alternative<ProgramPolicy>(engine_.policy())) {
                    mutate("policy", policy_to_json(FixedPolicy{RateSpec::ht(0)}).dump());
                }
                mutate("program", std::nullopt);
                ack.result = {{"detached", was}};
            } else if (verb == "enable-telemetry") {
                const double ti = positive_interval(payload, "interval_s", telemetry_interval_s_);
                const double si = positive_interval(payload, "stats_interval_s", stats_interval_s_);
                mutate("telemetry.interval_s", number_text(ti));
                mutate("stats.interval_s", number_text(si));
                mutate("telemetry.enabled", "true");
                ack.result = {{"enabled", true}, {"interval_s", ti}, {"stats_interval_s", si}};
            } else if (verb == "disable-telemetry") {
                mutate("telemetry.enabled", "false");
                ack.result = {{"enabled", false}};
            } else if (verb == "get-stats") {
                json stations = json::object();
                auto one = [&](std::uint8_t w) { stations[std::to_string(w)] = stats_to_json(engine_.read_stats(w)); };
                if (payload.contains("wcid")) {
                    one(wcid_field(payload));
                } else {
                    for (std::uint8_t w = 1; w < kMaxStations; ++w) {
                        if (engine_.read_stats(w).tx_total > 0) one(w);
                    }
                }
                ack.result = {{"stations", stations},
                              {"policy", policy_to_json(engine_.policy())},
                              {"program", engine_.program_id()},
                              {"rate_generation", engine_.rate_generation()},
                              {"telemetry_dropped", engine_.telemetry().dropped()}};
                if (auto* sc = dynamic_cast<script::ScriptController*>(engine_.program().get())) {
                    ack.result["program_aborts"] = sc->aborts();
                }
            } else if (verb == "config-set") {
                const auto key = required<std::string>(payload, "key");
                if (key.empty()) throw PayloadError("key", "must be non-empty");
                if (!payload.contains("value") || !payload.at("value").is_string()) {
                    throw PayloadError("value", "required string field");
                }
                const auto prior = get_key("cfg:" + key);
                mutate("cfg:" + key, payload.at("value").get<std::string>());
                ack.result = {{"key", key}, {"value", config_.at(key)}, {"prior", prior ? json(*prior) : json(nullptr)}};
            } else if (verb == "config-revert" || verb == "config-persist") {
                std::string key;
                if (payload.contains("undo_key")) {
                    key = required<std::string>(payload, "undo_key");
                } else {
                    key = "cfg:" + required<std::string>(payload, "key");
                }
                // policy and program only make sense together
                std::vector<std::string> keys = {key};
                if (key == "policy" || key == "program") keys = {"program", "policy"};
                if (verb == "config-revert") {
                    bool reverted = false;
                    for (const auto& k : keys) {
                        if (const auto prior = undo_.revert(k)) {
                            apply_key(k, *prior);
                            reverted = true;
                        }
                    }
                    const auto now = get_key(key);
                    ack.result = {{"undo_key", key}, {"reverted", reverted}, {"value", now ? json(*now) : json(nullptr)}};
                } else {
                    std::size_t n = 0;
                    for (const auto& k : keys) n += undo_.persist(k);
                    ack.result = {{"undo_key", key}, {"persisted", n}};
                }
            }
        }
        ack.ok = true;
    } catch (const StageFailure& e) {
        ack.ok = false;
        ack.error = e.error;
    } catch (const PayloadError& e) {
        ack.ok = false;
        ack.error = {{"code", "bad-payload"}, {"field", e.field()}, {"message", e.what()}};
    } catch (const EngineError& e) {
        ack.ok = false;
        ack.error = error_json(e.code(), e.what());
    } catch (const std::invalid_argument& e) {
        ack.ok = false;
        ack.error = error_json("bad-payload", e.what());
    } catch (const std::exception& e) {
        ack.ok = false;
        ack.error = error_json("internal", e.what());
    }
    if (ack.ok) {
        ack.error = json();
    } else {
        ack.result = json();
    }
    return ack;
}

json Device::deploy(const json& payload, Ack& ack)
{
    const auto id = optional_field<std::string>(payload, "policy_id", "policy");
    if (id.empty()) throw PayloadError("policy_id", "must be non-empty");
    std::shared_ptr<RateController> controller;
    json detail = json::object();

    if (payload.contains("native")) {
        const auto name = required<std::string>(payload, "native");
        try {
            controller = controllers::make_controller(name, payload.value("params", json::object()));
        } catch (const std::invalid_argument& e) {
            throw PayloadError("native", e.what());
        }
    } else {
        const auto source = required<std::string>(payload, "source");
        std::shared_ptr<const script::Program> program;
        try {
            program = script::parse(source, id);
        } catch (const script::ParseError& e) {
            throw StageFailure({{"code", "parse-error"}, {"stage", "parse"}, {"message", e.what()}});
        }
        const auto diags = script::lint(*program);
        if (!diags.empty()) {
            throw StageFailure({{"code", "lint-failed"},
                                {"stage", "lint"},
                                {"message", std::to_string(diags.size()) + " lint diagnostic(s)"},
                                {"diagnostics", diags}});
        }
        const auto report = script::verify(*program);
        if (!report.ok) {
            ack.verifier_log = report.log;
            throw StageFailure({{"code", "verifier-rejected"},
                                {"stage", "verify"},
                                {"message", "verifier rejected the program"},
                                {"instruction_estimate", report.instruction_estimate}});
        }
        ack.verifier_log = report.log;
        detail["instruction_estimate"] = report.instruction_estimate;
        controller = std::make_shared<script::ScriptController>(program);
    }

    const std::size_t state = controller->state_size();
    const bool created = state > 0 && engine_.ensure_algo_map(state);
    programs_[id] = controller;
    mutate("program", id);
    mutate("policy", policy_to_json(ProgramPolicy{id}).dump());
    detail["policy_id"] = id;
    detail["controller"] = std::string(controller->name());
    detail["state_size"] = state;
    detail["algo_map_created"] = created;
    detail["mode"] = "program";
    return detail;
}

std::optional<std::string> Device::get_key(const std::string& key) const
{
    if (key.rfind("cfg:", 0) == 0) {
        const auto it = config_.find(key.substr(4));
        return it == config_.end() ? std::nullopt : std::optional(it->second);
    }
    if (key == "policy") return policy_to_json(engine_.policy()).dump();
    if (key == "program") return engine_.program_id().empty() ? std::nullopt : std::optional(engine_.program_id());
    if (key == "telemetry.enabled") return std::string(telemetry_enabled_ ? "true" : "false");
    if (key == "telemetry.interval_s") return number_text(telemetry_interval_s_);
    if (key == "stats.interval_s") return number_text(stats_interval_s_);
    if (key.rfind("ratemap.", 0) == 0) {
        const auto w = static_cast<std::uint8_t>(std::stoi(key.substr(8)));
        const auto bytes = engine_.read_rate_map(w).encode();
        if (std::all_of(bytes.begin(), bytes.end(), [](std::byte b) { return b == std::byte{0}; })) return std::nullopt;
        return base64_encode(bytes);
    }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

void Device::apply_key(const std::string& key, const std::optional<std::string>& value)
{
    if (key.rfind("cfg:", 0) == 0) {
        if (value) {
            config_[key.substr(4)] = *value;
        } else {
            config_.erase(key.substr(4));
        }
    } else if (key == "policy") {
        engine_.set_policy(policy_from_json(json::parse(value.value())));
    } else if (key == "program") {
        if (!value) {
            engine_.detach_program();
        } else {
            engine_.attach_program(programs_.at(*value), *value);
        }
    } else if (key == "telemetry.enabled") {
        const bool on = value.value_or("false") == "true";
        if (on && !telemetry_enabled_) {
            engine_.telemetry().snapshot_read();  // start the first window empty
            stats_window_.clear();
            next_telemetry_ = clock_ + seconds_to_time(telemetry_interval_s_);
            next_stats_ = clock_ + seconds_to_time(stats_interval_s_);
        }
        telemetry_enabled_ = on;
    } else if (key == "telemetry.interval_s") {
        telemetry_interval_s_ = json::parse(value.value()).get<double>();
        next_telemetry_ = clock_ + seconds_to_time(telemetry_interval_s_);
    } else if (key == "stats.interval_s") {
        stats_interval_s_ = json::parse(value.value()).get<double>();
        next_stats_ = clock_ + seconds_to_time(stats_interval_s_);
    } else if (key.rfind("ratemap.", 0) == 0) {
        const auto w = static_cast<std::uint8_t>(std::stoi(key.substr(8)));
        std::array<std::byte, RateMapEntry::kSize> raw{};
        if (value) {
            const Bytes b = base64_decode(*value);
            std::copy_n(b.begin(), std::min(b.size(), raw.size()), raw.begin());
        }
        engine_.write_rate_map(w, RateMapEntry::decode(raw));
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

void Device::mutate(const std::string& key, std::optional<std::string> value)
{
    auto prior = get_key(key);
    apply_key(key, value);
    undo_.record(key, std::move(prior));
}

std::map<std::string, std::string> Device::config_snapshot() const
{
    std::lock_guard lock(mu_);
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : config_) out["cfg:" + k] = v;
    for (const char* k : {"policy", "program", "telemetry.enabled", "telemetry.interval_s", "stats.interval_s"}) {
        if (auto v = get_key(k)) out[k] = *v;
    }
    for (std::uint8_t w = 1; w < kMaxStations; ++w) {
        const std::string k = "ratemap." + std::to_string(w);
        if (auto v = get_key(k)) out[k] = *v;
    }
    return out;
}

std::size_t Device::undo_depth() const
{
    std::lock_guard lock(mu_);
    return undo_.entries().size();
}

void Device::poll_streams(phy::SimTime now)
{
    std::vector<Outgoing> out;
    {
        std::lock_guard lock(mu_);
        poll_locked(now, out);
    }
    flush(out);
}

void Device::poll_locked(phy::SimTime now, std::vector<Outgoing>& out)
{
    clock_ = std::max(clock_, now);
    if (!telemetry_enabled_) return;
    if (now >= next_telemetry_) {
        auto entries = engine_.telemetry().snapshot_read();
        json list = json::array();
        for (const auto& e : entries) list.push_back(e);
        out.push_back({topic("telemetry"),
                       {{"device", options_.name},
                        {"time_s", time_to_seconds(now)},
                        {"count", entries.size()},
                        {"dropped_total", engine_.telemetry().dropped()},
                        {"entries", std::move(list)}}});
        stats_window_.insert(stats_window_.end(), entries.begin(), entries.end());
        const auto step = seconds_to_time(telemetry_interval_s_);
        while (next_telemetry_ <= now) next_telemetry_ += step;
    }
    if (now >= next_stats_) {
        json stations = json::object();
        for (const auto& [w, agg] : telemetry::aggregate_stats(stats_window_)) {
            json s = agg;
            s["map"] = stats_to_json(engine_.read_stats(w));
            stations[std::to_string(w)] = s;
        }
        out.push_back({topic("stats"),
                       {{"device", options_.name},
                        {"time_s", time_to_seconds(now)},
                        {"window_frames", stats_window_.size()},
                        {"stations", std::move(stations)}}});
        stats_window_.clear();
        const auto step = seconds_to_time(stats_interval_s_);
        while (next_stats_ <= now) next_stats_ += step;
    }
}

void Device::flush(std::vector<Outgoing>& out)
{
    for (const auto& m : out) bus_.publish(m.topic, m.message);
    out.clear();
}

json Device::start_workload(const json& payload)
{
    if (running_) throw EngineError("busy", "a workload is already running");
    if (worker_.joinable()) worker_.join();

    const auto kind_name = required<std::string>(payload, "kind");
    workloads::WorkloadSpec spec;
    try {
        spec = workloads::WorkloadSpec::defaults(workloads::workload_kind_from_string(kind_name));
    } catch (const std::invalid_argument& e) {
        throw PayloadError("kind", e.what());
    }
    spec.duration_s = optional_field<double>(payload, "duration_s", spec.duration_s);
    spec.burst_bytes = optional_field<std::uint64_t>(payload, "burst_bytes", spec.burst_bytes);
    spec.repeats = optional_field<std::uint32_t>(payload, "repeats", spec.repeats);
    spec.packet_bytes = optional_field<std::uint32_t>(payload, "packet_bytes", spec.packet_bytes);
    spec.packet_interval_s = optional_field<double>(payload, "packet_interval_s", spec.packet_interval_s);
    spec.segment_play_s = optional_field<double>(payload, "segment_play_s", spec.segment_play_s);
    spec.time_cap_s = optional_field<double>(payload, "time_cap_s", spec.time_cap_s);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw PayloadError("kind", e.what());
    }
    workloads::LinkConfig cfg = options_.link;
    if (payload.contains("wcid")) cfg.wcid = wcid_field(payload);
    const std::uint64_t id = ++run_id_;
    const auto seed = optional_field<std::uint64_t>(payload, "seed", mix_seed(options_.seed, id));

    stop_ = false;
    running_ = true;
    worker_ = std::thread([this, spec, cfg, seed, id] {
        phy::SimTime base{0};
        {
            std::lock_guard lock(mu_);
            base = clock_;
        }
        json msg = {{"run_id", id}, {"kind", workloads::to_string(spec.kind)}};
        std::optional<workloads::QoEResult> result;
        phy::SimTime end = base;
        try {
            workloads::SimLink link(engine_, cfg, seed);
            link.set_engine_mutex(&mu_);
            link.set_frame_hook([this, base](phy::SimTime t) { poll_streams(base + t); });
            workloads::RunControl ctl;
            ctl.should_stop = [this] { return stop_.load(); };
            result = workloads::run_workload(link, spec, {}, ctl);
            end = base + link.now();
            msg["ok"] = true;
            msg["result"] = workloads::summary_json(*result);
        } catch (const std::exception& e) {
            msg["ok"] = false;
            msg["error"] = error_json("workload-failed", e.what());
        }
        {
            std::lock_guard lock(mu_);
            clock_ = std::max(clock_, end);
            if (result) last_result_ = result;
        }
        bus_.publish(topic("workload"), msg);
        running_ = false;
    });
    return {{"run_id", id}, {"kind", kind_name}, {"seed", seed}, {"started", true}};
}

json Device::stop_workload()
{
    const bool was = running_.load();
    stop_ = true;
    if (worker_.joinable()) {
        if (worker_.get_id() == std::this_thread::get_id()) {
            return {{"stopped", was}, {"pending", true}};  // asked from the worker itself
        }
        worker_.join();
    }
    json r = {{"stopped", was}, {"run_id", run_id_}};
    std::lock_guard lock(mu_);
    if (was && last_result_) r["result"] = workloads::summary_json(*last_result_);
    return r;
}

void Device::wait_workload()
{
    std::lock_guard wl(wl_mu_);
    if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

std::optional<workloads::QoEResult> Device::last_workload_result() const
{
    std::lock_guard lock(mu_);
    return last_result_;
}

}  // namespace rclab::control

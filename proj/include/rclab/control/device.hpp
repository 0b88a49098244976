#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rclab/control/bus.hpp"
#include "rclab/control/undo.hpp"
#include "rclab/engine/policy_engine.hpp"
#include "rclab/workloads/workload.hpp"

namespace rclab::control {

struct Command {
    std::string topic;  // rc/<device>/<verb>
    nlohmann::json payload = nlohmann::json::object();
    std::string correlation_id;
};

struct Ack {
    std::string correlation_id;
    bool ok = false;
    nlohmann::json result;  // set when ok
    nlohmann::json error;   // {code, message, ...} when !ok
    std::optional<std::string> verifier_log;
};

void to_json(nlohmann::json& j, const Ack& a);
void from_json(const nlohmann::json& j, Ack& a);

struct DeviceOptions {
    std::string name = "dev0";
    /// Channel and station used by start-workload.
    workloads::LinkConfig link;
    std::uint64_t seed = 1;
    double telemetry_interval_s = 1.0;
    double stats_interval_s = 5.0;
};

/// One managed device: owns a policy engine, a flat key/value config store
/// and the session undo log, answers commands on rc/<name>/<verb> and
/// publishes acks and streams on rc/<name>/{ack,telemetry,stats,workload}.
class Device {
public:
    Device(Bus& bus, DeviceOptions options);
    ~Device();
    Device(const Device&) = delete;
    Device& operator=(const Device&) = delete;

    static const std::vector<std::string>& verbs();

    /// Handles one command and returns its ack. Does not publish the ack;
    /// commands arriving over the bus are acked on the bus.
    Ack handle_command(const Command& cmd);

    /// Emits any telemetry/stats messages due at device time `now`.
    void poll_streams(phy::SimTime now);

    /// Every undo-tracked key with its current value; absent keys omitted.
    std::map<std::string, std::string> config_snapshot() const;

    const std::string& name() const { return options_.name; }
    std::string topic(const std::string& leaf) const { return "rc/" + options_.name + "/" + leaf; }

    /// The engine is shared with workload threads; hold mutex() while using it.
    PolicyEngine& engine() { return engine_; }
    std::mutex& mutex() { return mu_; }

    std::size_t undo_depth() const;
    bool workload_running() const { return running_.load(); }
    /// Blocks until the current workload (if any) finishes.
    void wait_workload();
    std::optional<workloads::QoEResult> last_workload_result() const;

private:
    struct Outgoing {
        std::string topic;
        nlohmann::json message;
    };

    Ack dispatch(const std::string& verb, const nlohmann::json& payload, std::vector<Outgoing>& out);
    nlohmann::json deploy(const nlohmann::json& payload, Ack& ack);

    std::optional<std::string> get_key(const std::string& key) const;
    void apply_key(const std::string& key, const std::optional<std::string>& value);
    void mutate(const std::string& key, std::optional<std::string> value);

    nlohmann::json start_workload(const nlohmann::json& payload);
    nlohmann::json stop_workload();
    void poll_locked(phy::SimTime now, std::vector<Outgoing>& out);
    void flush(std::vector<Outgoing>& out);

    Bus& bus_;
    DeviceOptions options_;
    std::uint64_t sub_id_ = 0;

    mutable std::mutex mu_;
    PolicyEngine engine_;
    std::map<std::string, std::string> config_;
    UndoLog undo_;
    std::map<std::string, std::shared_ptr<RateController>> programs_;

    bool telemetry_enabled_ = false;
    double telemetry_interval_s_;
    double stats_interval_s_;
    phy::SimTime clock_{0};
    phy::SimTime next_telemetry_{0};
    phy::SimTime next_stats_{0};
    std::vector<telemetry::TelemetryEntry> stats_window_;

    std::mutex wl_mu_;
    std::thread worker_;
    std::atomic<bool> running_{false};
    std::atomic<bool> stop_{false};
    std::uint64_t run_id_ = 0;
    std::optional<workloads::QoEResult> last_result_;
};

}  // namespace rclab::control

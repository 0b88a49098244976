#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rclab/workloads/workload.hpp"

namespace rclab::harness {

/// A channel, link, workload set and algorithm list loaded from JSON.
/// See docs/scenario.md for the schema.
struct Scenario {
    std::string name = "default";
    std::uint64_t seed = 1;
    /// Kept as JSON so each pair can rebuild it with its own trace seed.
    nlohmann::json channel = {{"trace", {{"kind", "constant"}, {"rssi_dbm", -65.0}}}};
    int retry_limit = phy::kDefaultRetryLimit;
    std::uint8_t wcid = 1;
    workloads::TransportModel transport;
    std::vector<workloads::WorkloadSpec> workloads;
    std::vector<std::string> algorithms;
    std::uint32_t pairs = 15;
    /// Simulated seconds per sample; the default time cap for bulk kinds.
    double sample_duration_s = 120.0;
    /// Directory that relative algorithm paths resolve against.
    std::filesystem::path base_dir = ".";

    /// Channel model for one pair. Random-walk traces take `trace_seed`
    /// unless the scenario pins a seed.
    phy::ChannelModel build_channel(std::uint64_t trace_seed) const;
    workloads::LinkConfig link_config(std::uint64_t trace_seed) const;
};

/// Throws std::invalid_argument with a field path on schema errors.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
nlohmann::json scenario_to_json(const Scenario& s);
/// Reads and parses a scenario file; relative algorithm paths resolve
/// against the file's directory.
Scenario load_scenario(const std::filesystem::path& path);

/// Parses one workload entry: a kind name or {"kind": ..., overrides}.
/// Bulk kinds stop at `default_cap_s` unless the entry sets time_cap_s.
workloads::WorkloadSpec workload_from_json(const nlohmann::json& j, double default_cap_s = 120.0);
nlohmann::json workload_to_json(const workloads::WorkloadSpec& w);

/// Built-in scenario used when no file is given.
Scenario default_scenario();

}  // namespace rclab::harness

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rclab/workloads/link.hpp"

namespace rclab::harness {

struct SweepRow {
    std::uint8_t mcs = 0;
    std::uint64_t frames = 0;
    /// Frames delivered at the intended rate (no fallback).
    std::uint64_t delivered = 0;
    /// Frames delivered by any rung of the ladder.
    std::uint64_t delivered_any = 0;
    std::uint64_t attempts = 0;  // attempts at the intended rate
    double delivery_ratio = 0.0;
    /// Per-attempt success at the intended rate.
    double success_probability = 0.0;
    /// phy rate x success_probability.
    double expected_throughput_mbps = 0.0;
    /// Payload delivered at the intended rate over all airtime spent on
    /// frames intended for this MCS.
    double goodput_mbps = 0.0;
    double airtime_s = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // MCS 0..7
    std::uint64_t total_frames = 0;
    std::uint8_t best_goodput_mcs = 0;
};

/// Round-robins the link's station over MCS 0-7 (`frames_per_rate` frames on
/// each, `cycles` times) and aggregates the telemetry ring per intended MCS.
/// Replaces the engine's policy for the duration and restores it afterwards.
SweepResult sweep_all_rates(workloads::SimLink& link, std::uint32_t frames_per_rate, std::uint32_t cycles = 1,
                            std::uint32_t payload_bytes = 1500);

nlohmann::json to_json(const SweepResult& r);
std::string sweep_csv(const SweepResult& r);

}  // namespace rclab::harness

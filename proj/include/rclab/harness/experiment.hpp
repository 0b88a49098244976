#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rclab/harness/scenario.hpp"

namespace rclab::harness {

/// One algorithm on one workload across all pairs.
struct Cell {
    std::string algorithm;
    std::string workload;
    std::string metric_name;
    bool higher_is_better = true;
    std::vector<double> values;  // indexed by pair
    double median = 0.0;
    /// Orientation-corrected median over the best algorithm's; the best is 1.0.
    double score = 0.0;

    friend bool operator==(const Cell&, const Cell&) = default;
};

struct PairInfo {
    std::uint32_t index = 0;
    std::uint64_t seed = 0;
    /// Per workload: the link seed and the hash of the RSSI trace sampled on
    /// a fixed grid. Every algorithm in the pair saw these exact values.
    std::vector<std::uint64_t> link_seeds;
    std::vector<std::uint64_t> channel_hashes;

    friend bool operator==(const PairInfo&, const PairInfo&) = default;
};

struct Report {
    std::string scenario;
    std::uint64_t seed = 0;
    std::uint32_t pairs = 0;
    std::vector<std::string> algorithms;
    std::vector<std::string> workloads;  // labels, unique
    std::vector<Cell> cells;             // algorithm-major
    std::vector<PairInfo> pair_info;
    nlohmann::json plan;                 // the scenario as run

    const Cell& cell(const std::string& algorithm, const std::string& workload) const;

    friend bool operator==(const Report&, const Report&) = default;
};

struct AbOptions {
    /// 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// Paired A/B test: every pair replays the same channel realization under
/// each algorithm on a fresh engine. Throws AlgorithmRejected before running
/// anything if an algorithm cannot be installed.
Report run_ab_test(const Scenario& scenario, const AbOptions& options = {});

/// Median of `v`; +inf entries sort last. Empty input gives 0.
double median(std::vector<double> v);
/// Fills each cell's score from its median.
void normalize(Report& report);

/// FNV-1a over the trace sampled every 100 ms up to `horizon_s`, at 0.01 dB.
std::uint64_t channel_hash(const phy::ChannelModel& model, double horizon_s);

void to_json(nlohmann::json& j, const Report& r);
void from_json(const nlohmann::json& j, Report& r);

/// Writes report.json (json) or scores.csv plus raw.csv (csv) into `dir`.
/// Returns the written paths. IO errors throw std::runtime_error.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::string& format,
                                               const std::filesystem::path& dir);

std::string scores_csv(const Report& report);
std::string raw_csv(const Report& report);

}  // namespace rclab::harness

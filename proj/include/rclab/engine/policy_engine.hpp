#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rclab/engine/records.hpp"
#include "rclab/engine/shared_map.hpp"
#include "rclab/phy/channel.hpp"
#include "rclab/telemetry/ring.hpp"

namespace rclab {

using phy::RateSpec;

enum class FrameType : std::uint8_t { Mgmt, Ctrl, Data };

struct FixedPolicy {
    RateSpec rate = RateSpec::ht(4);
};

struct PerStationPolicy {
    std::map<std::uint8_t, RateSpec> overrides;
    RateSpec fallback = RateSpec::ht(0);
};

/// Cycles through `rates`, sending `frames_per_rate` frames at each.
struct RoundRobinPolicy {
    std::vector<RateSpec> rates;
    std::uint32_t frames_per_rate = 1;
};

struct FrameTypePolicy {
    RateSpec mgmt = RateSpec::ht(0);
    RateSpec ctrl = RateSpec::ht(0);
    RateSpec data = RateSpec::ht(4);
};

/// Rates come from the rate map, written by the attached program.
struct ProgramPolicy {
    std::string policy_id;
};

using PolicyMode = std::variant<FixedPolicy, PerStationPolicy, RoundRobinPolicy, FrameTypePolicy, ProgramPolicy>;

/// Throws std::invalid_argument when the mode violates its invariants.
void validate(const PolicyMode& mode);

class EngineError : public std::runtime_error {
public:
    EngineError(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code))
    {
    }
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

class PolicyEngine;

/// A rate-control program invoked on every TX completion in Program mode.
/// Implementations read and write the engine's shared maps.
class RateController {
public:
    virtual ~RateController() = default;
    virtual std::string_view name() const = 0;
    /// Bytes of per-station algorithm-map state; 0 if the controller keeps
    /// no map-resident state.
    virtual std::size_t state_size() const = 0;
    virtual void on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine) = 0;
};

/// One completed frame as reported by the radio.
struct TxCompletion {
    std::uint8_t wcid = 0;
    phy::TxOutcome outcome;
    RateSpec configured;
    std::uint32_t frame_length = 0;
    phy::SimTime time{0};
    double rssi_dbm = 0.0;
    bool aggregate = false;
};

/// The rate-control datapath: policy dispatch, generation-counted per-station
/// rate caches, the three shared maps and the telemetry ring.
class PolicyEngine {
public:
    static constexpr std::uint32_t kStatsBatch = 64;
    static constexpr std::size_t kDefaultAlgoValueSize = 12;

    struct Config {
        /// Used in Program mode when the station's rate map entry is invalid.
        RateSpec program_default = RateSpec::ht(0);
        std::size_t telemetry_capacity = telemetry::TelemetryRing::kDefaultCapacity;
    };

    PolicyEngine() : PolicyEngine(Config{}) {}
    explicit PolicyEngine(Config config);

    /// Replaces the active mode and bumps the rate generation. Station
    /// statistics, algorithm state and telemetry are preserved.
    void set_policy(PolicyMode mode);
    const PolicyMode& policy() const { return mode_; }
    std::uint64_t rate_generation() const { return rate_generation_; }

    RateSpec get_rate(std::uint8_t wcid, FrameType frame_type = FrameType::Data);

    /// Folds one completion into the station counters, flushes the stats map
    /// every 64 completions, records telemetry, and runs the attached program
    /// in Program mode. Returns the context handed to the program.
    TxStatusContext on_tx_completion(const TxCompletion& completion);

    // Shared maps ------------------------------------------------------
    void write_rate_map(std::uint8_t wcid, const RateMapEntry& entry);
    RateMapEntry read_rate_map(std::uint8_t wcid) const;
    StatsEntry read_stats(std::uint8_t wcid) const;
    Bytes read_algo(std::uint8_t wcid) const;
    void write_algo(std::uint8_t wcid, std::span<const std::byte> value);

    enum class MapKind { Rate, Stats, Algo };
    std::shared_ptr<ArrayMap> swap_map(MapKind which, std::shared_ptr<ArrayMap> next);
    const MapSlot& map_slot(MapKind which) const;

    /// Creates the algorithm map with `value_size` records unless one with
    /// that geometry already exists. Returns true if a new map was created.
    bool ensure_algo_map(std::size_t value_size);

    // Program attachment ---------------------------------------------
    void attach_program(std::shared_ptr<RateController> program, std::string policy_id);
    void detach_program();
    const std::shared_ptr<RateController>& program() const { return program_; }
    const std::string& program_id() const { return program_id_; }

    telemetry::TelemetryRing& telemetry() { return telemetry_; }
    const telemetry::TelemetryRing& telemetry() const { return telemetry_; }

    /// Number of times the station's driver rate cache has been rewritten.
    std::uint64_t cache_pushes(std::uint8_t wcid) const;

    /// Called with (wcid, station completion count) on every stats-map flush.
    void set_stats_flush_observer(std::function<void(std::uint8_t, std::uint64_t)> observer)
    {
        flush_observer_ = std::move(observer);
    }

private:
    struct StationState {
        RateSpec cached_rate;
        std::uint64_t cached_generation = 0;
        std::optional<RateSpec> last_pushed_program_rate;
        std::uint64_t cache_pushes = 0;
        // round-robin position
        std::size_t rr_index = 0;
        std::uint32_t rr_sent = 0;
        // live counters
        std::uint64_t completions = 0;
        std::uint64_t tx_total = 0;
        std::uint64_t tx_success = 0;
        std::uint64_t tx_retries = 0;
        std::uint32_t batch_pending = 0;
        std::uint32_t batch_failures = 0;
        std::uint32_t ewma_per = 0;
        std::uint32_t flush_count = 0;
    };

    StationState& station(std::uint8_t wcid);
    void push_cache(StationState& st, const RateSpec& rate);
    RateSpec program_rate(std::uint8_t wcid) const;
    void flush_stats(std::uint8_t wcid, StationState& st, const TxCompletion& c);

    Config config_;
    PolicyMode mode_;
    std::uint64_t rate_generation_ = 1;
    std::array<StationState, kMaxStations> stations_{};
    MapSlot rate_map_;
    MapSlot stats_map_;
    MapSlot algo_map_;
    std::shared_ptr<RateController> program_;
    std::string program_id_;
    telemetry::TelemetryRing telemetry_;
    std::function<void(std::uint8_t, std::uint64_t)> flush_observer_;
};

/// Integer EWMA step on per-mille values with alpha = 1/8, rounding the
/// increment half away from zero.
std::uint32_t ewma_per_step(std::uint32_t ewma, std::uint32_t batch_per);

}  // namespace rclab

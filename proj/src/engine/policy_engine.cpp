#include "rclab/engine/policy_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rclab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

void check_wcid(std::uint8_t wcid)
{
    if (!valid_wcid(wcid)) {
        throw std::out_of_range("wcid " + std::to_string(wcid) + " outside [1,127]");
    }
}

template <typename T>
T saturate(std::uint64_t v)
{
    return static_cast<T>(std::min<std::uint64_t>(v, std::numeric_limits<T>::max()));
}

std::int32_t round_dbm(double rssi) { return static_cast<std::int32_t>(std::lround(rssi)); }

}  // namespace

void validate(const PolicyMode& mode)
{
    std::visit(Overloaded{
                   [](const FixedPolicy& p) { phy::validate(p.rate); },
                   [](const PerStationPolicy& p) {
                       phy::validate(p.fallback);
                       for (const auto& [wcid, rate] : p.overrides) {
                           check_wcid(wcid);
                           phy::validate(rate);
                       }
                   },
                   [](const RoundRobinPolicy& p) {
                       if (p.rates.empty()) {
                           throw std::invalid_argument("round-robin needs at least one rate");
                       }
                       if (p.frames_per_rate < 1) {
                           throw std::invalid_argument("round-robin frames_per_rate must be >= 1");
                       }
                       for (const auto& r : p.rates) {
                           phy::validate(r);
                       }
                   },
                   [](const FrameTypePolicy& p) {
                       phy::validate(p.mgmt);
                       phy::validate(p.ctrl);
                       phy::validate(p.data);
                   },
                   [](const ProgramPolicy&) {},
               },
               mode);
}

std::uint32_t ewma_per_step(std::uint32_t ewma, std::uint32_t batch_per)
{
    const auto delta = static_cast<std::int64_t>(batch_per) - static_cast<std::int64_t>(ewma);
    const std::int64_t step = delta >= 0 ? (delta + 4) / 8 : -((-delta + 4) / 8);
    return static_cast<std::uint32_t>(std::clamp<std::int64_t>(ewma + step, 0, 1000));
}

PolicyEngine::PolicyEngine(Config config)
    : config_(config),
      mode_(FixedPolicy{}),
      rate_map_(RateMapEntry::kSize),
      stats_map_(StatsEntry::kSize),
      algo_map_(kDefaultAlgoValueSize),
      telemetry_(config.telemetry_capacity)
{
    phy::validate(config_.program_default);
}

void PolicyEngine::set_policy(PolicyMode mode)
{
    validate(mode);
    if (std::holds_alternative<ProgramPolicy>(mode) && !program_) {
        throw EngineError("no-program-attached", "Program mode requires an attached policy program");
    }
    mode_ = std::move(mode);
    ++rate_generation_;
}

PolicyEngine::StationState& PolicyEngine::station(std::uint8_t wcid)
{
    check_wcid(wcid);
    return stations_[wcid];
}

void PolicyEngine::push_cache(StationState& st, const RateSpec& rate)
{
    st.cached_rate = rate;
    st.cached_generation = rate_generation_;
    ++st.cache_pushes;
}

RateSpec PolicyEngine::program_rate(std::uint8_t wcid) const
{
    const RateMapEntry entry = read_rate_map(wcid);
    if (entry.valid != 1) {
        return config_.program_default;
    }
    try {
        return entry.to_rate();
    } catch (const std::invalid_argument&) {
        return config_.program_default;
    }
}

RateSpec PolicyEngine::get_rate(std::uint8_t wcid, FrameType frame_type)
{
    StationState& st = station(wcid);
    const bool stale = st.cached_generation < rate_generation_;
    return std::visit(Overloaded{
                          [&](const FixedPolicy& p) {
                              if (stale) {
                                  push_cache(st, p.rate);
                              }
                              return st.cached_rate;
                          },
                          [&](const PerStationPolicy& p) {
                              if (stale) {
                                  const auto it = p.overrides.find(wcid);
                                  push_cache(st, it != p.overrides.end() ? it->second : p.fallback);
                              }
                              return st.cached_rate;
                          },
                          [&](const RoundRobinPolicy& p) {
                              const RateSpec rate = p.rates[st.rr_index % p.rates.size()];
                              if (++st.rr_sent >= p.frames_per_rate) {
                                  st.rr_sent = 0;
                                  st.rr_index = (st.rr_index + 1) % p.rates.size();
                              }
                              if (stale || st.cached_rate != rate) {
                                  push_cache(st, rate);
                              }
                              return rate;
                          },
                          [&](const FrameTypePolicy& p) {
                              if (stale) {
                                  push_cache(st, p.data);
                              }
                              switch (frame_type) {
                              case FrameType::Mgmt:
                                  return p.mgmt;
                              case FrameType::Ctrl:
                                  return p.ctrl;
                              case FrameType::Data:
                                  break;
                              }
                              return st.cached_rate;
                          },
                          [&](const ProgramPolicy&) {
                              if (stale) {
                                  st.last_pushed_program_rate.reset();
                              }
                              const RateSpec rate = program_rate(wcid);
                              if (st.last_pushed_program_rate != rate) {
                                  push_cache(st, rate);
                                  st.last_pushed_program_rate = rate;
                              }
                              return st.cached_rate;
                          },
                      },
                      mode_);
}

TxStatusContext PolicyEngine::on_tx_completion(const TxCompletion& c)
{
    StationState& st = station(c.wcid);
    const phy::TxOutcome& out = c.outcome;

    ++st.completions;
    ++st.tx_total;
    st.tx_retries += out.retry_count;
    if (out.success) {
        ++st.tx_success;
    } else {
        ++st.batch_failures;
    }
    if (++st.batch_pending == kStatsBatch) {
        flush_stats(c.wcid, st, c);
    }

    TxStatusContext ctx;
    ctx.wcid = c.wcid;
    ctx.success = out.success ? 1 : 0;
    ctx.mcs_used = c.configured.mcs;
    ctx.retry_count = out.retry_count;
    ctx.ewma_per = st.ewma_per;
    ctx.tx_total = st.tx_total;
    ctx.tx_success = st.tx_success;
    ctx.tx_retries = st.tx_retries;
    ctx.signal = round_dbm(c.rssi_dbm);
    ctx.ack_signal = round_dbm(c.rssi_dbm);
    ctx.frame_length = c.frame_length;
    ctx.timestamp_ns = static_cast<std::uint64_t>(c.time.count());
    ctx.hw_mcs_used = out.hw_mcs_used;
    ctx.is_aggregate = c.aggregate ? 1 : 0;
    ctx.hw_rate_flags = out.hw_rate_flags;

    telemetry::TelemetryEntry e;
    e.timestamp_us = static_cast<std::uint32_t>(static_cast<std::uint64_t>(c.time.count()) / 1000);
    e.wcid = c.wcid;
    e.intended_mcs = c.configured.mcs;
    e.intended_flags = c.configured.flags();
    e.hw_mcs = out.hw_mcs_used;
    e.hw_flags = out.hw_rate_flags;
    e.retry_count = saturate<std::uint8_t>(out.retry_count);
    e.outcome_flags = static_cast<std::uint8_t>((out.success ? telemetry::kOutcomeSuccess : 0) |
                                                (c.aggregate ? telemetry::kOutcomeAggregate : 0));
    e.rssi = static_cast<std::int8_t>(std::clamp(round_dbm(c.rssi_dbm), -128, 127));
    e.frame_length = saturate<std::uint16_t>(c.frame_length);
    telemetry_.record(e);

    if (program_ && std::holds_alternative<ProgramPolicy>(mode_)) {
        program_->on_tx_status(ctx, *this);
    }
    return ctx;
}

void PolicyEngine::flush_stats(std::uint8_t wcid, StationState& st, const TxCompletion& c)
{
    const std::uint32_t batch_per = st.batch_failures * 1000 / kStatsBatch;
    st.ewma_per = ewma_per_step(st.ewma_per, batch_per);
    ++st.flush_count;

    StatsEntry s;
    s.tx_total = st.tx_total;
    s.tx_success = st.tx_success;
    s.tx_retries = st.tx_retries;
    s.ewma_per = st.ewma_per;
    s.signal = round_dbm(c.rssi_dbm);
    s.ack_signal = round_dbm(c.rssi_dbm);
    s.last_mcs = c.configured.mcs;
    s.flush_count = st.flush_count;
    const auto bytes = s.encode();
    stats_map_.acquire()->write(wcid, bytes);

    st.batch_pending = 0;
    st.batch_failures = 0;
    if (flush_observer_) {
        flush_observer_(wcid, st.completions);
    }
}

void PolicyEngine::write_rate_map(std::uint8_t wcid, const RateMapEntry& entry)
{
    if (wcid >= kMaxStations) {
        throw std::out_of_range("wcid outside rate map");
    }
    const auto bytes = entry.encode();
    rate_map_.acquire()->write(wcid, bytes);
}

RateMapEntry PolicyEngine::read_rate_map(std::uint8_t wcid) const
{
    std::array<std::byte, RateMapEntry::kSize> buf{};
    rate_map_.acquire()->read_into(wcid, buf);
    return RateMapEntry::decode(buf);
}

StatsEntry PolicyEngine::read_stats(std::uint8_t wcid) const
{
    std::array<std::byte, StatsEntry::kSize> buf{};
    stats_map_.acquire()->read_into(wcid, buf);
    return StatsEntry::decode(buf);
}

Bytes PolicyEngine::read_algo(std::uint8_t wcid) const { return algo_map_.acquire()->read(wcid); }

void PolicyEngine::write_algo(std::uint8_t wcid, std::span<const std::byte> value)
{
    algo_map_.acquire()->write(wcid, value);
}

const MapSlot& PolicyEngine::map_slot(MapKind which) const
{
    switch (which) {
    case MapKind::Rate:
        return rate_map_;
    case MapKind::Stats:
        return stats_map_;
    case MapKind::Algo:
        break;
    }
    return algo_map_;
}

std::shared_ptr<ArrayMap> PolicyEngine::swap_map(MapKind which, std::shared_ptr<ArrayMap> next)
{
    return const_cast<MapSlot&>(map_slot(which)).swap(std::move(next));
}

bool PolicyEngine::ensure_algo_map(std::size_t value_size)
{
    if (algo_map_.value_size() == value_size) {
        return false;
    }
    algo_map_.recreate(value_size);
    return true;
}

void PolicyEngine::attach_program(std::shared_ptr<RateController> program, std::string policy_id)
{
    if (!program) {
        throw std::invalid_argument("cannot attach a null program");
    }
    program_ = std::move(program);
    program_id_ = std::move(policy_id);
    if (std::holds_alternative<ProgramPolicy>(mode_)) {
        ++rate_generation_;
    }
}

void PolicyEngine::detach_program()
{
    program_.reset();
    program_id_.clear();
}

std::uint64_t PolicyEngine::cache_pushes(std::uint8_t wcid) const
{
    check_wcid(wcid);
    return stations_[wcid].cache_pushes;
}

}  // namespace rclab

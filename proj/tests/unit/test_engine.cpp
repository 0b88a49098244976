#include <doctest.h>

#include <atomic>
#include <thread>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/util/bytes.hpp"
#include "rclab/util/rng.hpp"

using namespace rclab;

namespace {

TxCompletion completion(std::uint8_t wcid, bool ok, std::uint8_t mcs = 4, std::uint32_t retries = 0)
{
    TxCompletion c;
    c.wcid = wcid;
    c.configured = RateSpec::ht(mcs);
    c.outcome.success = ok;
    c.outcome.retry_count = retries;
    c.outcome.hw_mcs_used = mcs;
    c.frame_length = 1500;
    c.rssi_dbm = -60;
    return c;
}

class NullController final : public RateController {
public:
    std::string_view name() const override { return "null"; }
    std::size_t state_size() const override { return 0; }
    void on_tx_status(const TxStatusContext&, PolicyEngine&) override { ++calls; }
    int calls = 0;
};

}  // namespace

TEST_CASE("record sizes")
{
    CHECK(RateMapEntry{}.encode().size() == 8);
    CHECK(StatsEntry{}.encode().size() == 48);
    CHECK(TxStatusContext{}.encode().size() == 120);
    CHECK(TxStatusContext::kFieldCount == 15);
    CHECK(kTxContextFieldNames.size() == 15);
}

TEST_CASE("record codecs round trip")
{
    Rng rng(8);
    for (int i = 0; i < 100000; ++i) {
        RateMapEntry r;
        r.mcs = static_cast<std::uint8_t>(rng.next_u64());
        r.streams = static_cast<std::uint8_t>(rng.next_u64());
        r.bandwidth = static_cast<std::uint8_t>(rng.next_u64());
        r.guard = static_cast<std::uint8_t>(rng.next_u64());
        r.phy_mode = static_cast<std::uint8_t>(rng.next_u64());
        r.valid = static_cast<std::uint8_t>(rng.below(2));
        REQUIRE(RateMapEntry::decode(r.encode()) == r);

        StatsEntry s;
        s.tx_total = rng.next_u64();
        s.tx_success = rng.next_u64();
        s.tx_retries = rng.next_u64();
        s.ewma_per = static_cast<std::uint32_t>(rng.below(1001));
        s.signal = static_cast<std::int32_t>(rng.next_u64());
        s.ack_signal = static_cast<std::int32_t>(rng.next_u64());
        s.last_mcs = static_cast<std::uint32_t>(rng.next_u64());
        s.flush_count = static_cast<std::uint32_t>(rng.next_u64());
        REQUIRE(StatsEntry::decode(s.encode()) == s);

        std::array<std::uint64_t, 15> args{};
        for (auto& a : args) {
            a = rng.next_u64();
        }
        const TxStatusContext c = TxStatusContext::from_args(args);
        REQUIRE(c.args() == args);
        REQUIRE(TxStatusContext::decode(c.encode()) == c);
    }
}

TEST_CASE("context slots follow table order")
{
    TxStatusContext c;
    c.wcid = 1;
    c.success = 2;
    c.mcs_used = 3;
    c.retry_count = 4;
    c.signal = -5;
    c.hw_rate_flags = 8;
    const auto a = c.args();
    CHECK(a[TxStatusContext::Wcid] == 1);
    CHECK(a[TxStatusContext::Success] == 2);
    CHECK(a[TxStatusContext::McsUsed] == 3);
    CHECK(a[TxStatusContext::RetryCount] == 4);
    CHECK(static_cast<std::int64_t>(a[8]) == -5);
    CHECK(a[14] == 8);
    const auto bytes = c.encode();
    CHECK(std::to_integer<int>(bytes[8 * 14]) == 8);
    CHECK(std::to_integer<int>(bytes[8 * 8]) == 0xFB);
}

TEST_CASE("stats entry layout")
{
    StatsEntry s;
    s.tx_total = 1;
    s.ewma_per = 0x0201;
    s.flush_count = 7;
    const auto b = s.encode();
    CHECK(std::to_integer<int>(b[0]) == 1);
    CHECK(std::to_integer<int>(b[24]) == 1);
    CHECK(std::to_integer<int>(b[25]) == 2);
    CHECK(std::to_integer<int>(b[40]) == 7);
    for (std::size_t i = 44; i < 48; ++i) {
        CHECK(std::to_integer<int>(b[i]) == 0);
    }
}

TEST_CASE("base64 helpers")
{
    const std::string text = "rate map";
    Bytes raw;
    for (char ch : text) {
        raw.push_back(static_cast<std::byte>(ch));
    }
    CHECK(base64_encode(raw) == "cmF0ZSBtYXA=");
    CHECK(base64_decode("cmF0ZSBtYXA=") == raw);
    CHECK_THROWS_AS(base64_decode("***"), std::invalid_argument);
}

TEST_CASE("set_policy and generation")
{
    PolicyEngine eng;
    CHECK(eng.get_rate(1).mcs == 4);
    const auto g = eng.rate_generation();
    eng.set_policy(FixedPolicy{RateSpec::ht(4)});
    eng.set_policy(FixedPolicy{RateSpec::ht(6)});
    CHECK(eng.rate_generation() == g + 2);
    for (std::uint8_t w = 1; w < 128; ++w) {
        CHECK(eng.get_rate(w).mcs == 6);
    }
    try {
        eng.set_policy(ProgramPolicy{"x"});
        FAIL("expected an error");
    } catch (const EngineError& e) {
        CHECK(e.code() == "no-program-attached");
    }
    CHECK_THROWS_AS(eng.set_policy(RoundRobinPolicy{{}, 1}), std::invalid_argument);
    CHECK_THROWS_AS(eng.set_policy(RoundRobinPolicy{{RateSpec::ht(1)}, 0}), std::invalid_argument);
}

TEST_CASE("wcid range")
{
    PolicyEngine eng;
    CHECK_THROWS_AS(eng.get_rate(0), std::out_of_range);
    CHECK_THROWS_AS(eng.get_rate(128), std::out_of_range);
    CHECK_THROWS_AS(eng.on_tx_completion(completion(0, true)), std::out_of_range);
}

TEST_CASE("round robin")
{
    PolicyEngine eng;
    eng.set_policy(RoundRobinPolicy{{RateSpec::ht(0), RateSpec::ht(4), RateSpec::ht(7)}, 2});
    std::vector<int> seq;
    for (int i = 0; i < 7; ++i) {
        seq.push_back(eng.get_rate(1).mcs);
    }
    CHECK(seq == std::vector<int>{0, 0, 4, 4, 7, 7, 0});

    SUBCASE("cycle exactness")
    {
        PolicyEngine e2;
        e2.set_policy(RoundRobinPolicy{{RateSpec::ht(1), RateSpec::ht(2), RateSpec::ht(3), RateSpec::ht(5)}, 3});
        std::map<int, int> counts;
        const int k = 25;
        for (int i = 0; i < k * 3 * 4; ++i) {
            ++counts[e2.get_rate(9).mcs];
        }
        for (int m : {1, 2, 3, 5}) {
            CHECK(counts[m] == k * 3);
        }
    }
    SUBCASE("position survives a mode switch")
    {
        const RoundRobinPolicy rr = std::get<RoundRobinPolicy>(eng.policy());
        eng.set_policy(FixedPolicy{});
        eng.get_rate(1);
        eng.set_policy(rr);
        CHECK(eng.get_rate(1).mcs == 0);
        CHECK(eng.get_rate(1).mcs == 4);
    }
}

TEST_CASE("frame type and per-station policies")
{
    PolicyEngine eng;
    eng.set_policy(FrameTypePolicy{RateSpec::ht(0), RateSpec::ht(1), RateSpec::ht(7)});
    CHECK(eng.get_rate(3, FrameType::Mgmt).mcs == 0);
    CHECK(eng.get_rate(3, FrameType::Ctrl).mcs == 1);
    CHECK(eng.get_rate(3, FrameType::Data).mcs == 7);

    FrameTypePolicy defaults;
    CHECK(defaults.mgmt.mcs == 0);
    CHECK(defaults.ctrl.mcs == 0);
    CHECK(defaults.data.mcs == 4);

    PerStationPolicy ps;
    ps.overrides[5] = RateSpec::ht(6);
    eng.set_policy(ps);
    CHECK(eng.get_rate(5).mcs == 6);
    CHECK(eng.get_rate(6).mcs == 0);
}

TEST_CASE("generation amortization")
{
    PolicyEngine eng;
    eng.set_policy(FixedPolicy{RateSpec::ht(2)});
    for (int i = 0; i < 10000; ++i) {
        eng.get_rate(4);
    }
    CHECK(eng.cache_pushes(4) == 1);
    eng.set_policy(FixedPolicy{RateSpec::ht(3)});
    for (int i = 0; i < 10000; ++i) {
        eng.get_rate(4);
    }
    CHECK(eng.cache_pushes(4) == 2);
}

TEST_CASE("program mode reads the rate map")
{
    PolicyEngine eng;
    auto prog = std::make_shared<NullController>();
    eng.attach_program(prog, "null");
    const auto gen = eng.rate_generation();
    eng.set_policy(ProgramPolicy{"null"});

    CHECK(eng.get_rate(5).mcs == 0);  // invalid entry: default MCS0
    eng.write_rate_map(5, RateMapEntry::from_rate(RateSpec::ht(5)));
    CHECK(eng.rate_generation() == gen + 1);  // map writes never bump it
    CHECK(eng.get_rate(5).mcs == 5);
    const auto pushes = eng.cache_pushes(5);
    eng.write_rate_map(5, RateMapEntry::from_rate(RateSpec::ht(5)));
    CHECK(eng.get_rate(5).mcs == 5);
    CHECK(eng.cache_pushes(5) == pushes);  // value-equal write: no re-push

    eng.write_rate_map(5, RateMapEntry::from_rate(RateSpec::ht(3)));
    CHECK(eng.get_rate(5).mcs == 3);
    CHECK(eng.cache_pushes(5) == pushes + 1);

    RateMapEntry off = RateMapEntry::from_rate(RateSpec::ht(7));
    off.valid = 0;
    eng.write_rate_map(5, off);
    CHECK(eng.get_rate(5).mcs == 0);

    eng.on_tx_completion(completion(5, true));
    CHECK(prog->calls == 1);
    eng.set_policy(FixedPolicy{});
    eng.on_tx_completion(completion(5, true));
    CHECK(prog->calls == 1);  // programs run only in Program mode
}

TEST_CASE("stats flush cadence")
{
    PolicyEngine eng;
    std::vector<std::uint64_t> flushes;
    eng.set_stats_flush_observer([&](std::uint8_t wcid, std::uint64_t n) {
        CHECK(wcid == 7);
        flushes.push_back(n);
    });
    for (int i = 0; i < 63; ++i) {
        eng.on_tx_completion(completion(7, true));
    }
    CHECK(eng.read_stats(7) == StatsEntry{});
    eng.on_tx_completion(completion(7, true));
    StatsEntry s = eng.read_stats(7);
    CHECK(s.tx_total == 64);
    CHECK(s.tx_success == 64);
    CHECK(s.ewma_per == 0);
    CHECK(s.flush_count == 1);

    for (int i = 64; i < 10000; ++i) {
        eng.on_tx_completion(completion(7, true));
    }
    REQUIRE(flushes.size() == 10000 / 64);
    for (std::size_t i = 0; i < flushes.size(); ++i) {
        CHECK(flushes[i] == 64 * (i + 1));
    }
}

TEST_CASE("ewma per-mille step")
{
    PolicyEngine eng;
    for (int i = 0; i < 64; ++i) {
        eng.on_tx_completion(completion(2, i % 4 != 0, 4, i % 4 == 0 ? 7 : 0));
    }
    const StatsEntry s = eng.read_stats(2);
    CHECK(s.tx_total == 64);
    CHECK(s.tx_success == 48);
    CHECK(s.tx_retries == 16 * 7);
    // 250 / 8 = 31.25
    CHECK(s.ewma_per == 31);

    CHECK(ewma_per_step(0, 1000) == 125);
    CHECK(ewma_per_step(1000, 0) == 875);
    CHECK(ewma_per_step(500, 500) == 500);
    std::uint32_t e = 0;
    for (int i = 0; i < 200; ++i) {
        e = ewma_per_step(e, 1000);
        CHECK(e <= 1000);
    }
    CHECK(e >= 990);
}

TEST_CASE("completion context")
{
    PolicyEngine eng;
    TxCompletion c = completion(9, true, 6, 5);
    c.outcome.hw_mcs_used = 0;
    c.outcome.hw_rate_flags = phy::kFlagLegacy;
    c.time = std::chrono::milliseconds(1500);
    c.aggregate = true;
    const TxStatusContext ctx = eng.on_tx_completion(c);
    CHECK(ctx.wcid == 9);
    CHECK(ctx.success == 1);
    CHECK(ctx.mcs_used == 6);
    CHECK(ctx.retry_count == 5);
    CHECK(ctx.tx_total == 1);
    CHECK(ctx.tx_retries == 5);
    CHECK(ctx.signal == -60);
    CHECK(ctx.timestamp_ns == 1500000000ULL);
    CHECK(ctx.hw_mcs_used == 0);
    CHECK(ctx.hw_rate_flags == 0);
    CHECK(ctx.is_aggregate == 1);

    const auto t = eng.telemetry().snapshot_read();
    REQUIRE(t.size() == 1);
    CHECK(t[0].intended_mcs == 6);
    CHECK(t[0].hw_flags == 0);
    CHECK(t[0].timestamp_us == 1500000);
    CHECK(t[0].aggregate());
    CHECK(t[0].fell_back());
}

TEST_CASE("map swap geometry and contents")
{
    PolicyEngine eng;
    CHECK_THROWS_AS(eng.swap_map(PolicyEngine::MapKind::Rate, std::make_shared<ArrayMap>(8, 64)),
                    std::invalid_argument);
    CHECK_THROWS_AS(eng.swap_map(PolicyEngine::MapKind::Stats, std::make_shared<ArrayMap>(40)),
                    std::invalid_argument);

    Bytes rec(12, std::byte{0x5A});
    eng.write_algo(3, rec);
    auto fresh = std::make_shared<ArrayMap>(12);
    Bytes other(12, std::byte{0x11});
    fresh->write(3, other);
    const auto old = eng.swap_map(PolicyEngine::MapKind::Algo, fresh);
    CHECK(old->read(3) == rec);
    CHECK(eng.read_algo(3) == other);

    CHECK_FALSE(eng.ensure_algo_map(12));
    CHECK(eng.read_algo(3) == other);
    CHECK(eng.ensure_algo_map(20));
    CHECK(eng.read_algo(3) == Bytes(20));
}

TEST_CASE("concurrent readers never see a mixed map")
{
    MapSlot slot(8);
    auto make_map = [](std::uint8_t fill) {
        auto m = std::make_shared<ArrayMap>(8);
        const Bytes v(8, std::byte{fill});
        for (std::size_t k = 0; k < m->max_entries(); ++k) {
            m->write(k, v);
        }
        return m;
    };
    slot.swap(make_map(1));

    std::atomic<bool> stop{false};
    std::atomic<int> mixed{0};
    std::atomic<long> reads{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 3; ++t) {
        readers.emplace_back([&] {
            while (!stop.load()) {
                const auto m = slot.acquire();
                const Bytes a = m->read(1);
                const Bytes b = m->read(127);
                if (a != b || a[0] != a[7]) {
                    ++mixed;
                }
                ++reads;
            }
        });
    }
    std::vector<std::thread> writers;
    // Entry writes race with readers too; each record must stay whole.
    writers.emplace_back([&] {
        for (int i = 0; i < 2000; ++i) {
            auto m = slot.acquire();
            const Bytes v(8, std::byte{static_cast<std::uint8_t>(100 + i % 50)});
            m->write(64, v);
            const Bytes got = m->read(64);
            if (got[0] != got[7]) {
                ++mixed;
            }
        }
    });
    for (int i = 0; i < 500; ++i) {
        const auto old = slot.swap(make_map(static_cast<std::uint8_t>(2 + i % 90)));
        CHECK(old != nullptr);
    }
    for (auto& w : writers) {
        w.join();
    }
    stop = true;
    for (auto& r : readers) {
        r.join();
    }
    CHECK(mixed.load() == 0);
    CHECK(reads.load() > 0);
}

TEST_CASE("set_policy preserves station state")
{
    PolicyEngine eng;
    for (int i = 0; i < 64; ++i) {
        eng.on_tx_completion(completion(4, true));
    }
    Bytes rec(12, std::byte{7});
    eng.write_algo(4, rec);
    eng.set_policy(FixedPolicy{RateSpec::ht(1)});
    eng.set_policy(RoundRobinPolicy{{RateSpec::ht(1)}, 1});
    CHECK(eng.read_stats(4).tx_total == 64);
    CHECK(eng.read_algo(4) == rec);
    CHECK(eng.telemetry().head() == 64);
}

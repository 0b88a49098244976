#include <doctest.h>

#include <cmath>

#include "rclab/controllers/hold_retest.hpp"
#include "rclab/controllers/iterate3.hpp"
#include "rclab/controllers/minstrel.hpp"
#include "rclab/controllers/registry.hpp"
#include "rclab/util/rng.hpp"

using namespace rclab;
using namespace rclab::controllers;

namespace {

TxStatusContext ctx_of(std::uint64_t wcid, std::uint64_t success, std::uint64_t used, std::uint64_t retry)
{
    TxStatusContext c;
    c.wcid = wcid;
    c.success = success;
    c.mcs_used = used;
    c.retry_count = retry;
    c.hw_mcs_used = used;
    c.hw_rate_flags = phy::kFlagHt;
    return c;
}

AlgoState random_state(Rng& rng)
{
    AlgoState s;
    s.current_mcs = static_cast<std::uint8_t>(rng.below(10));
    s.last_good_mcs = static_cast<std::uint8_t>(rng.below(10));
    s.recent_ok = static_cast<std::uint8_t>(rng.below(2));
    s.promote_streak = static_cast<std::uint8_t>(rng.below(8));
    s.mcs5_cooldown = static_cast<std::uint8_t>(rng.below(8));
    s.outage_guard = static_cast<std::uint8_t>(rng.below(12));
    s.low_ok_streak = static_cast<std::uint8_t>(rng.below(6));
    s.frame_count = static_cast<std::uint32_t>(rng.below(1u << 20));
    return s;
}

}  // namespace

TEST_CASE("iterate3 defaults")
{
    const IterateParams p;
    CHECK(p.mcs_count == 8);
    CHECK(p.default_mcs == 4);
    CHECK(p.default_last_good == 3);
    CHECK(p.retest_period_mask == 15);
    CHECK(p.high_retry_thresh == 2);
    CHECK(p.very_high_retry == 3);
    CHECK(p.promote_streak_req == 4);
    CHECK(p.mcs5_cooldown_init == 6);
    CHECK(p.mid_cooldown_reduce == 2);
    CHECK(p.outage_guard_init == 10);
    CHECK(p.outage_exit_streak_req == 3);
}

TEST_CASE("algo state codec is 12 bytes")
{
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const AlgoState s = random_state(rng);
        const auto bytes = s.encode();
        CHECK(bytes.size() == 12);
        CHECK(AlgoState::decode(bytes) == s);
    }
}

TEST_CASE("iterate3 worked traces")
{
    SUBCASE("fresh station, clean frame at MCS4")
    {
        const auto r = iterate3_step(AlgoState{}, ctx_of(5, 1, 4, 0));
        REQUIRE(r.chosen);
        CHECK(*r.chosen == 3);
        CHECK(r.state.last_good_mcs == 4);
        CHECK(r.state.promote_streak == 1);
    }
    SUBCASE("failure at MCS5 arms the cooldown")
    {
        AlgoState s;
        s.current_mcs = 5;
        s.last_good_mcs = 5;
        s.low_ok_streak = 3;
        const auto r = iterate3_step(s, ctx_of(5, 0, 5, 1));
        REQUIRE(r.chosen);
        CHECK(r.state.mcs5_cooldown == 6);
        // The failure at MCS >= 4 also trips the outage guard, which holds MCS3.
        CHECK(r.state.outage_guard == 10);
        CHECK(*r.chosen == 3);
    }
    SUBCASE("outage guard holds MCS3 and counts down")
    {
        AlgoState s;
        s.outage_guard = 10;
        const auto r = iterate3_step(s, ctx_of(5, 1, 3, 0));
        CHECK(*r.chosen == 3);
        CHECK(r.state.outage_guard == 9);
        CHECK(r.state.low_ok_streak == 1);
    }
    SUBCASE("three retries force MCS3")
    {
        Rng rng(11);
        for (int i = 0; i < 200; ++i) {
            AlgoState s = random_state(rng);
            s.outage_guard = 0;
            const auto r = iterate3_step(s, ctx_of(7, rng.below(2), rng.below(8), 3));
            CHECK(*r.chosen == 3);
            CHECK(r.state.promote_streak == 0);
        }
    }
}

TEST_CASE("iterate3 rejects bad wcid without touching state")
{
    Rng rng(4);
    const AlgoState s = random_state(rng);
    for (std::uint64_t w : {std::uint64_t{0}, std::uint64_t{128}, std::uint64_t{1000}}) {
        const auto r = iterate3_step(s, ctx_of(w, 1, 4, 0));
        CHECK_FALSE(r.chosen);
        CHECK(r.state == s);
    }
}

TEST_CASE("iterate3 promotes after four clean frames once the gate is open")
{
    IterateParams p;
    p.prime_low_ok_streak = true;
    AlgoState s = initial_algo_state(p);
    std::uint8_t used = 4;
    std::vector<int> chosen;
    for (int i = 0; i < 6; ++i) {
        const auto r = iterate3_step(s, ctx_of(9, 1, used, 0), p);
        s = r.state;
        used = *r.chosen;
        chosen.push_back(used);
    }
    CHECK(chosen == std::vector<int>{4, 4, 4, 5, 5, 5});

    // Verbatim zero-init keeps the station at MCS3 on a clean channel.
    AlgoState z = initial_algo_state(IterateParams{});
    used = 4;
    for (int i = 0; i < 100; ++i) {
        const auto r = iterate3_step(z, ctx_of(9, 1, used, 0));
        z = r.state;
        used = *r.chosen;
        CHECK(used == 3);
    }
}

TEST_CASE("iterate3 property sweep")
{
    Rng rng(20240601);
    for (int i = 0; i < 200000; ++i) {
        const AlgoState s = random_state(rng);
        const TxStatusContext c = ctx_of(1 + rng.below(127), rng.below(2), rng.below(8), rng.below(6));
        const auto r = iterate3_step(s, c);
        REQUIRE(r.chosen);
        const std::uint8_t chosen = *r.chosen;
        CHECK(chosen >= 3);
        if (r.state.mcs5_cooldown > 0) {
            CHECK(chosen <= 4);
        }
        if (chosen == 5 && c.success == 1 && r.state.last_good_mcs <= 4) {
            CHECK(r.state.promote_streak >= 4);
            CHECK(r.state.mcs5_cooldown == 0);
            CHECK(r.state.outage_guard == 0);
            CHECK(r.state.low_ok_streak >= 3);
        }
    }
}

TEST_CASE("iterate3 closed loop stays within MCS 3..5")
{
    for (bool primed : {false, true}) {
        IterateParams p;
        p.prime_low_ok_streak = primed;
        Rng rng(primed ? 8 : 9);
        AlgoState s = initial_algo_state(p);
        std::uint64_t used = 4;
        for (int i = 0; i < 50000; ++i) {
            const auto r = iterate3_step(s, ctx_of(3, rng.bernoulli(0.8) ? 1 : 0, used, rng.below(4)), p);
            s = r.state;
            used = *r.chosen;
            CHECK(used >= 3);
            CHECK(used <= 5);
        }
    }
}

TEST_CASE("minstrel best rate")
{
    std::array<double, 8> probs{1, 1, 1, 1, 1, 1.0, 0.7, 0.5};
    CHECK(minstrel_best(probs) == 5);
    probs.fill(1.0);
    CHECK(minstrel_best(probs) == 7);
    probs.fill(0.0);
    CHECK(minstrel_best(probs) == 0);  // ties go low

    // 26 * 1.0 == 52 * 0.5: tie resolves to the lower MCS.
    probs = {0, 0, 0, 1.0, 0, 0.5, 0, 0};
    CHECK(minstrel_best(probs) == 3);
}

TEST_CASE("minstrel argmax is scale invariant")
{
    Rng rng(12);
    for (int i = 0; i < 10000; ++i) {
        std::array<double, 8> probs{};
        for (auto& p : probs) {
            p = rng.uniform();
        }
        const double k = 0.01 + rng.uniform();
        std::array<double, 8> scaled{};
        for (std::size_t m = 0; m < 8; ++m) {
            scaled[m] = probs[m] * k;
        }
        CHECK(minstrel_best(scaled) == minstrel_best(probs));
    }
}

TEST_CASE("minstrel samples one frame in ten")
{
    MinstrelParams p;
    MinstrelState s = initial_minstrel_state(p);
    Rng rng(99);
    std::uint64_t non_best = 0;
    std::array<std::uint64_t, 8> sample_hist{};
    const int frames = 100000;
    std::uint8_t used = 0;
    for (int i = 0; i < frames; ++i) {
        const bool ok = rng.bernoulli(used <= 5 ? 0.95 : 0.2);
        const auto r = minstrel_step(s, ctx_of(1, ok ? 1 : 0, used, ok ? 0 : 3), p);
        if (r.chosen != r.state.current_best) {
            ++non_best;
            CHECK(r.sampled);
            ++sample_hist[r.chosen];
        }
        s = r.state;
        used = r.chosen;
    }
    const double frac = static_cast<double>(non_best) / frames;
    CHECK(frac >= 0.09);
    CHECK(frac <= 0.11);
    CHECK(s.current_best == 5);
    for (std::size_t m = 0; m < 8; ++m) {
        if (m != 5) {
            CHECK(sample_hist[m] > 1000);
        }
    }
}

TEST_CASE("minstrel folds windows with alpha 0.25")
{
    MinstrelParams p;
    p.sample_every = 1000000;
    MinstrelState s = initial_minstrel_state(p);
    // First window: all successes at MCS0 seed the estimate with 1.0.
    for (int i = 0; i < 100; ++i) {
        s = minstrel_step(s, ctx_of(1, 1, 0, 0), p).state;
    }
    CHECK(s.ewma_prob[0] == doctest::Approx(1.0));
    // Second window: half the frames fail with 3 retries (4 attempts).
    for (int i = 0; i < 100; ++i) {
        const bool ok = i % 2 == 0;
        s = minstrel_step(s, ctx_of(1, ok ? 1 : 0, 0, ok ? 0 : 3), p).state;
    }
    // ratio = 50 / (50 + 200) = 0.2
    CHECK(s.ewma_prob[0] == doctest::Approx(0.75 * 1.0 + 0.25 * 0.2));
}

TEST_CASE("minstrel does not credit a fallback delivery to the configured rate")
{
    MinstrelParams p;
    p.sample_every = 1000000;
    MinstrelState s = initial_minstrel_state(p);
    for (int i = 0; i < 100; ++i) {
        TxStatusContext c = ctx_of(1, 1, 7, 4);
        c.hw_mcs_used = 6;
        s = minstrel_step(s, c, p).state;
    }
    CHECK(s.ewma_prob[7] == doctest::Approx(0.0));
}

TEST_CASE("hold-retest keeps the held rate")
{
    SUBCASE("clean channel concentration")
    {
        HoldRetestState s;
        int at_held = 0;
        for (int i = 0; i < 20000; ++i) {
            const auto r = hold_retest_step(s, ctx_of(1, 1, 4, 0), 4, 16383);
            s = r.state;
            at_held += r.chosen == 4 ? 1 : 0;
        }
        CHECK(at_held / 20000.0 >= 0.999);
        CHECK(s.probes >= 1);
    }
    SUBCASE("mask 0 probes every frame")
    {
        HoldRetestState s;
        for (int i = 0; i < 10; ++i) {
            const auto r = hold_retest_step(s, ctx_of(1, 1, 4, 0), 4, 0);
            s = r.state;
            CHECK(r.chosen == 5);
        }
    }
    SUBCASE("a successful probe never promotes")
    {
        HoldRetestState s;
        std::uint8_t used = 4;
        for (int i = 0; i < 200; ++i) {
            const auto r = hold_retest_step(s, ctx_of(1, 1, used, 0), 4, 31);
            s = r.state;
            used = r.chosen;
            CHECK((r.chosen == 4 || r.chosen == 5));
            if (i > 0 && s.frame_count % 32 == 1) {
                CHECK(r.chosen == 4);  // frame after a probe returns to held
            }
        }
        CHECK(s.probe_failures == 0);
    }
    SUBCASE("held 7 probes stay at 7")
    {
        const auto r = hold_retest_step(HoldRetestState{}, ctx_of(1, 1, 7, 0), 7, 0);
        CHECK(r.chosen == 7);
    }
}

TEST_CASE("controller registry")
{
    for (const auto& n : controller_names()) {
        const auto c = make_controller(n);
        REQUIRE(c);
        CHECK(c->name() == n);
    }
    CHECK_THROWS_AS(make_controller("nope"), std::invalid_argument);
    CHECK_THROWS_AS(make_controller("minstrel", {{"update_interval", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_controller("hold-retest", {{"held", 9}}), std::invalid_argument);
}

TEST_CASE("iterate3 controller runs against the engine maps")
{
    PolicyEngine eng;
    auto ctrl = make_controller("iterate3", {{"prime_low_ok_streak", true}});
    eng.attach_program(ctrl, "iterate3");
    eng.set_policy(ProgramPolicy{"iterate3"});
    CHECK(eng.get_rate(2).mcs == 0);  // nothing written yet
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        TxCompletion c;
        c.wcid = 2;
        c.configured = eng.get_rate(2);
        c.outcome.success = true;
        c.outcome.hw_mcs_used = c.configured.mcs;
        c.frame_length = 1500;
        eng.on_tx_completion(c);
    }
    CHECK(eng.get_rate(2).mcs == 5);
    const AlgoState st = AlgoState::decode(eng.read_algo(2));
    CHECK(st.frame_count == 20);
    CHECK(st.current_mcs == 5);
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rclab/harness/algorithms.hpp"
#include "rclab/harness/experiment.hpp"
#include "rclab/harness/noise_demo.hpp"
#include "rclab/harness/sweep.hpp"
#include "rclab/workloads/link.hpp"

using namespace rclab;
using namespace rclab::harness;
using nlohmann::json;

namespace {

const std::filesystem::path kSource = RCLAB_SOURCE_DIR;

Scenario small(std::vector<std::string> algorithms, json workloads, double rssi = -60.0, std::uint32_t pairs = 3)
{
    return scenario_from_json({{"name", "t"},
                               {"seed", 7},
                               {"channel", {{"trace", {{"kind", "constant"}, {"rssi_dbm", rssi}}}}},
                               {"workloads", workloads},
                               {"algorithms", algorithms},
                               {"pairs", pairs},
                               {"sample_duration_s", 20}});
}

json short_peak() { return json::array({{{"kind", "peak_throughput"}, {"duration_s", 1.0}}}); }

std::size_t count_lines(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

}  // namespace

TEST_CASE("scenario parsing and validation")
{
    const auto s = small({"minstrel", "fixed:3"}, json::array({"voip", {{"kind", "web_page"}, {"repeats", 2}}}));
    CHECK(s.pairs == 3);
    REQUIRE(s.workloads.size() == 2);
    CHECK(s.workloads[1].repeats == 2);
    CHECK(s.workloads[1].time_cap_s == 20.0);  // sample_duration caps bulk kinds
    const auto back = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_to_json(back) == scenario_to_json(s));

    CHECK_THROWS_AS(scenario_from_json({{"pairs", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(scenario_from_json({{"channel", {{"trace", {{"kind", "bogus"}}}}}}), std::invalid_argument);
    CHECK_THROWS_AS(scenario_from_json({{"workloads", {"no_such"}}}), std::invalid_argument);
    CHECK_THROWS_AS(scenario_from_json({{"link", {{"wcid", 0}}}}), std::invalid_argument);

    // random walks take the pair seed unless pinned
    auto rw = scenario_from_json({{"channel", {{"trace", {{"kind", "random_walk"}}}}}});
    CHECK(channel_hash(rw.build_channel(1), 30) != channel_hash(rw.build_channel(2), 30));
    CHECK(channel_hash(rw.build_channel(1), 30) == channel_hash(rw.build_channel(1), 30));
    rw = scenario_from_json({{"channel", {{"trace", {{"kind", "random_walk"}, {"seed", 5}}}}}});
    CHECK(channel_hash(rw.build_channel(1), 30) == channel_hash(rw.build_channel(2), 30));
}

TEST_CASE("algorithm resolver")
{
    PolicyEngine e;
    install_algorithm(e, "fixed:5");
    CHECK(e.get_rate(1).mcs == 5);
    install_algorithm(e, "iterate3");
    CHECK(std::holds_alternative<ProgramPolicy>(e.policy()));
    CHECK_THROWS_AS(install_algorithm(e, "fixed:8"), std::invalid_argument);
    CHECK_THROWS_AS(install_algorithm(e, "fixed:x"), std::invalid_argument);
    CHECK_THROWS_AS(install_algorithm(e, "nope"), std::invalid_argument);

    const auto lint_dir = kSource / "tests/fixtures/lint";
    PolicyEngine e2;
    install_algorithm(e2, "01_clean.rcp", lint_dir);
    CHECK(std::holds_alternative<ProgramPolicy>(e2.policy()));
    try {
        install_algorithm(e2, "02_unchecked_state_index.rcp", lint_dir);
        FAIL("expected rejection");
    } catch (const AlgorithmRejected& r) {
        CHECK(r.diagnostics().find("rule 1") != std::string::npos);
    }
}

TEST_CASE("report mechanics on a hand-computed two-pair fixture")
{
    Report r;
    r.pairs = 2;
    r.algorithms = {"a", "b"};
    r.workloads = {"peak_throughput", "file_download"};
    r.pair_info = {{0, 11, {1, 2}, {5, 6}}, {1, 12, {3, 4}, {7, 8}}};
    auto cell = [](std::string a, std::string w, std::string m, bool hib, std::vector<double> v) {
        Cell c;
        c.algorithm = a;
        c.workload = w;
        c.metric_name = m;
        c.higher_is_better = hib;
        c.values = v;
        c.median = median(v);
        return c;
    };
    const double inf = std::numeric_limits<double>::infinity();
    r.cells = {cell("a", "peak_throughput", "goodput_mbps", true, {10, 20}),
               cell("a", "file_download", "mean_fct_s", false, {4, 6}),
               cell("b", "peak_throughput", "goodput_mbps", true, {30, 30}),
               cell("b", "file_download", "mean_fct_s", false, {2, inf})};
    normalize(r);
    // medians: a 15 / 5 s, b 30 / inf; inverse FCT: a 0.2, b 0
    CHECK(r.cell("a", "peak_throughput").median == 15.0);
    CHECK(r.cell("a", "peak_throughput").score == doctest::Approx(0.5));
    CHECK(r.cell("b", "peak_throughput").score == 1.0);
    CHECK(r.cell("a", "file_download").median == 5.0);
    CHECK(std::isinf(r.cell("b", "file_download").median));
    CHECK(r.cell("a", "file_download").score == 1.0);
    CHECK(r.cell("b", "file_download").score == 0.0);

    Report back = json(r).get<Report>();
    CHECK(back == r);

    const auto dir = std::filesystem::temp_directory_path() / "rclab_test_report";
    std::filesystem::remove_all(dir);
    emit_report(r, "csv", dir);
    CHECK(count_lines(dir / "scores.csv") == 1 + 2 * 2);
    CHECK(count_lines(dir / "raw.csv") == 1 + 2 * 2 * 2);
    std::ifstream in(dir / "scores.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("b,file_download,mean_fct_s,0,inf,0") != std::string::npos);
    CHECK_THROWS_AS(emit_report(r, "xml", dir), std::invalid_argument);
}

TEST_CASE("median handles even counts and infinities")
{
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK(std::isinf(median({1, inf})));
    CHECK(median({}) == 0);
}

TEST_CASE("identical algorithms give zero per-pair deltas")
{
    auto s = small({"minstrel", "minstrel"}, json::array({{{"kind", "peak_throughput"}, {"duration_s", 1.0}}, "voip"}),
                   -75.0, 4);
    const auto r = run_ab_test(s);
    for (const auto& w : r.workloads) {
        CHECK(r.cells[0].workload == w);
        const auto& a = r.cells[r.workloads.size() * 0 + (&w - r.workloads.data())];
        const auto& b = r.cells[r.workloads.size() * 1 + (&w - r.workloads.data())];
        REQUIRE(a.values.size() == 4);
        for (std::size_t p = 0; p < 4; ++p) CHECK(a.values[p] - b.values[p] == 0.0);
        CHECK(a.score == 1.0);
        CHECK(b.score == 1.0);
        break;
    }
    for (std::size_t i = 0; i < r.cells.size() / 2; ++i) CHECK(r.cells[i].values == r.cells[i + r.cells.size() / 2].values);
}

TEST_CASE("fixed mcs7 dominates mcs0 on a clean channel in every pair")
{
    const auto r = run_ab_test(small({"fixed:0", "fixed:7"}, short_peak(), -50.0, 5));
    const auto& lo = r.cell("fixed:0", "peak_throughput");
    const auto& hi = r.cell("fixed:7", "peak_throughput");
    for (std::size_t p = 0; p < 5; ++p) CHECK(hi.values[p] > lo.values[p]);
    CHECK(hi.score == 1.0);
    CHECK(lo.score < 0.2);
}

TEST_CASE("ab is deterministic and thread-count independent")
{
    auto s = scenario_from_json({{"seed", 3},
                                 {"channel", {{"trace", {{"kind", "random_walk"}, {"start_dbm", -72.0}}}}},
                                 {"workloads", short_peak()},
                                 {"algorithms", {"minstrel", "iterate3", "fixed:4"}},
                                 {"pairs", 6}});
    const auto a = json(run_ab_test(s, {1})).dump();
    const auto b = json(run_ab_test(s, {4})).dump();
    CHECK(a == b);
    const auto r = json::parse(a).get<Report>();
    // pairs differ from each other but algorithms within a pair share the channel
    CHECK(r.pair_info[0].channel_hashes != r.pair_info[1].channel_hashes);
    for (std::size_t p = 0; p < r.pair_info.size(); ++p) CHECK(r.pair_info[p].index == p);
}

TEST_CASE("ab aborts on an undeployable algorithm")
{
    auto s = small({"minstrel", "02_unchecked_state_index.rcp"}, short_peak());
    s.base_dir = kSource / "tests/fixtures/lint";
    CHECK_THROWS_AS(run_ab_test(s), AlgorithmRejected);
}

TEST_CASE("sweep cycle exactness and clean channel")
{
    PolicyEngine e;
    workloads::LinkConfig cfg;
    cfg.channel = phy::ChannelModel::standard(phy::RssiTrace{phy::ConstantTrace{-40.0}});
    workloads::SimLink link(e, cfg, 1);
    const auto r = sweep_all_rates(link, 1, 2);
    CHECK(r.total_frames == 16);
    for (const auto& row : r.rows) {
        CHECK(row.frames == 2);
        CHECK(row.delivery_ratio == 1.0);
    }
    for (std::size_t m = 1; m < r.rows.size(); ++m) CHECK(r.rows[m].goodput_mbps > r.rows[m - 1].goodput_mbps);
    CHECK(std::holds_alternative<FixedPolicy>(e.policy()));  // restored
}

TEST_CASE("sweep finds the oracle rate past a knee")
{
    for (double rssi : {-81.0, -76.0, -72.0}) {
        PolicyEngine e;
        workloads::LinkConfig cfg;
        cfg.channel = phy::ChannelModel::standard(phy::RssiTrace{phy::ConstantTrace{rssi}});
        workloads::SimLink link(e, cfg, 9);
        const auto r = sweep_all_rates(link, 50, 100);
        const auto oracle = workloads::oracle_mcs(cfg.channel, rssi);
        CAPTURE(rssi);
        CHECK(r.best_goodput_mcs == oracle);
        std::uint8_t best_tp = 0;
        for (const auto& row : r.rows) {
            if (row.expected_throughput_mbps > r.rows[best_tp].expected_throughput_mbps) best_tp = row.mcs;
        }
        CHECK(best_tp == oracle);
        // two rates past the knee the per-attempt success has collapsed
        CHECK(r.rows[oracle + 2].success_probability < 0.5 * r.rows[oracle].success_probability);
        for (std::size_t m = oracle + 1; m < r.rows.size(); ++m) CHECK(r.rows[m].delivery_ratio < r.rows[m - 1].delivery_ratio);
    }
}

TEST_CASE("genie candidates: A is better on the fixed grid")
{
    const auto m = phy::ChannelModel::standard();
    CHECK(grid_goodput_mbps(m, 0) > grid_goodput_mbps(m, -1));
    GenieController a(m, 0), b(m, -1);
    CHECK(a.pick(-40) == 7);
    CHECK(b.pick(-40) == 6);
    CHECK(b.pick(-100) == 1);
}

TEST_CASE("scoring noise demo")
{
    NoiseDemoOptions o;
    const auto drift = scoring_noise_demo(o);
    MESSAGE("naive " << drift.naive_pick_error_rate << " normalized " << drift.normalized_pick_error_rate);
    CHECK(drift.naive_pick_error_rate > 0.40);
    CHECK(drift.normalized_pick_error_rate <= 0.10);

    o.trials = 50;
    o.constant_trace = true;
    const auto flat = scoring_noise_demo(o);
    CHECK(flat.naive_pick_error_rate == 0.0);
    CHECK(flat.normalized_pick_error_rate == 0.0);

    o.constant_trace = false;
    o.b_second = true;
    const auto biased = scoring_noise_demo(o);
    MESSAGE("b second: naive " << biased.naive_pick_error_rate << " normalized " << biased.normalized_pick_error_rate);
    CHECK(biased.naive_pick_error_rate > 0.5);
    CHECK(biased.normalized_pick_error_rate <= 0.10);

    o.b_second = false;
    o.identical = true;
    o.trials = 200;
    const auto same = scoring_noise_demo(o);
    MESSAGE("identical: naive " << same.naive_pick_error_rate << " normalized " << same.normalized_pick_error_rate);
    // 200 fair coin flips: 3.5 sigma is about +-0.125
    CHECK(std::abs(same.naive_pick_error_rate - 0.5) < 0.125);
    CHECK(std::abs(same.normalized_pick_error_rate - 0.5) < 0.125);

    CHECK(to_json(scoring_noise_demo({.trials = 8})) == to_json(scoring_noise_demo({.trials = 8, .threads = 1})));
}

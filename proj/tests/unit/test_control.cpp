#include <doctest.h>

#include <fstream>
#include <sstream>

#include "rclab/control/codec.hpp"
#include "rclab/control/device.hpp"
#include "rclab/control/socket.hpp"
#include "rclab/util/rng.hpp"

using namespace rclab;
using namespace rclab::control;
using nlohmann::json;

namespace {

std::string read_file(const std::string& rel)
{
    std::ifstream in(std::string(RCLAB_SOURCE_DIR) + "/" + rel);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Rig {
    Bus bus;
    Device dev{bus, DeviceOptions{}};
    std::vector<json> acks;
    std::vector<json> telemetry;
    std::vector<json> stats;
    std::vector<json> workload;

    Rig()
    {
        bus.subscribe("rc/dev0/ack", [this](const std::string&, const json& m) { acks.push_back(m); });
        bus.subscribe("rc/dev0/telemetry", [this](const std::string&, const json& m) { telemetry.push_back(m); });
        bus.subscribe("rc/dev0/stats", [this](const std::string&, const json& m) { stats.push_back(m); });
        bus.subscribe("rc/dev0/workload", [this](const std::string&, const json& m) { workload.push_back(m); });
    }

    Ack cmd(const std::string& verb, json payload = json::object(), const std::string& id = "c")
    {
        return dev.handle_command({"rc/dev0/" + verb, std::move(payload), id});
    }

    void frames(double from_s, double to_s, int fps, std::uint8_t wcid = 1)
    {
        const int n = static_cast<int>((to_s - from_s) * fps + 0.5);
        std::lock_guard lock(dev.mutex());
        for (int i = 0; i < n; ++i) {
            TxCompletion c;
            c.wcid = wcid;
            c.configured = RateSpec::ht(4);
            c.outcome.success = true;
            c.outcome.hw_mcs_used = 4;
            c.outcome.hw_rate_flags = phy::kFlagHt;
            c.frame_length = 1500;
            c.time = std::chrono::duration_cast<phy::SimTime>(std::chrono::duration<double>(from_s + double(i) / fps));
            c.rssi_dbm = -60;
            dev.engine().on_tx_completion(c);
        }
    }
};

phy::SimTime secs(double s) { return std::chrono::duration_cast<phy::SimTime>(std::chrono::duration<double>(s)); }

}  // namespace

TEST_CASE("topic filters")
{
    CHECK(topic_matches("rc/+/ack", "rc/dev0/ack"));
    CHECK_FALSE(topic_matches("rc/+/ack", "rc/dev0/x/ack"));
    CHECK(topic_matches("rc/#", "rc/dev0/x/ack"));
    CHECK(topic_matches("rc/#", "rc"));
    CHECK_FALSE(topic_matches("rc/dev0", "rc/dev0/ack"));
    CHECK(topic_matches("a/b", "a/b"));
    CHECK_FALSE(topic_matches("a/+", "a"));
}

TEST_CASE("policy codec round trip")
{
    const std::vector<PolicyMode> modes = {
        FixedPolicy{RateSpec::ht(6)},
        PerStationPolicy{{{3, RateSpec::ht(2)}, {9, RateSpec::legacy(4)}}, RateSpec::ht(1)},
        RoundRobinPolicy{{RateSpec::ht(0), RateSpec::ht(7)}, 5},
        FrameTypePolicy{RateSpec::legacy(0), RateSpec::ht(1), RateSpec::ht(5)},
        ProgramPolicy{"p1"},
    };
    for (const auto& m : modes) {
        const json j = policy_to_json(m);
        CHECK(policy_to_json(policy_from_json(j)) == j);
    }
    CHECK_THROWS_AS(policy_from_json({{"mode", "fixed"}, {"mcs", 9}}), PayloadError);
    CHECK_THROWS_AS(policy_from_json({{"mode", "warp"}}), PayloadError);
    CHECK_THROWS_AS(policy_from_json({{"mode", "round-robin"}, {"rates", json::array()}}), PayloadError);
}

TEST_CASE("every command gets exactly one ack with its correlation id")
{
    Rig rig;
    int n = 0;
    std::vector<std::string> topics;
    for (const auto& v : Device::verbs()) topics.push_back("rc/dev0/" + v);
    topics.push_back("rc/dev0/reboot");
    for (const auto& t : topics) {
        rig.bus.publish(t, {{"correlation_id", "id-" + std::to_string(n++)}, {"payload", json::object()}});
    }
    rig.bus.publish("rc/dev0/set-rate", json::array());  // not an object
    REQUIRE(rig.acks.size() == topics.size() + 1);
    for (int i = 0; i < n; ++i) CHECK(rig.acks[i]["correlation_id"] == "id-" + std::to_string(i));
    for (const auto& a : rig.acks) CHECK(a.contains("error") != a["ok"].get<bool>());
    CHECK(rig.acks[n - 1]["error"]["code"] == "unknown-topic");
    // outbound topics are not commands
    rig.bus.publish("rc/dev0/telemetry", json::object());
    CHECK(rig.acks.size() == topics.size() + 1);
}

TEST_CASE("set-policy and set-rate drive the engine")
{
    Rig rig;
    auto a = rig.cmd("set-policy", {{"mode", "fixed"}, {"mcs", 4}});
    REQUIRE(a.ok);
    CHECK(rig.dev.engine().get_rate(1).mcs == 4);
    a = rig.cmd("set-rate", {{"mcs", 6}, {"wcid", 3}});
    REQUIRE(a.ok);
    CHECK(rig.dev.engine().get_rate(3).mcs == 6);
    CHECK(rig.dev.engine().get_rate(1).mcs == 4);

    a = rig.cmd("set-policy", {{"mode", "fixed"}, {"mcs", "four"}});
    CHECK_FALSE(a.ok);
    CHECK(a.error["code"] == "bad-payload");
    CHECK(a.error["field"] == "mcs");
    a = rig.cmd("write-rate-map", {{"wcid", 300}, {"rate", 1}});
    CHECK(a.error["field"] == "wcid");
    a = rig.cmd("config-set", {{"key", "x"}});
    CHECK(a.error["field"] == "value");
}

TEST_CASE("rate map write and read")
{
    Rig rig;
    REQUIRE(rig.cmd("write-rate-map", {{"wcid", 5}, {"rate", {{"mcs", 3}, {"guard", "short"}}}}).ok);
    auto a = rig.cmd("read-map", {{"map", "rate"}, {"wcid", 5}});
    REQUIRE(a.ok);
    CHECK(a.result["entry"]["mcs"] == 3);
    CHECK(a.result["entry"]["guard"] == 1);
    CHECK(a.result["entry"]["valid"] == true);
    CHECK(rig.cmd("read-map", {{"map", "stats"}, {"wcid", 5}}).result["entry"]["tx_total"] == 0);
    CHECK_FALSE(rig.cmd("read-map", {{"map", "lpm"}, {"wcid", 5}}).ok);
}

TEST_CASE("deploy pipeline stages")
{
    Rig rig;
    const std::string iterate3 = read_file("policies/iterate3.rcp");
    auto a = rig.cmd("deploy-policy", {{"source", iterate3}, {"policy_id", "iterate3"}});
    REQUIRE(a.ok);
    CHECK(std::holds_alternative<ProgramPolicy>(rig.dev.engine().policy()));
    CHECK(rig.dev.engine().program_id() == "iterate3");

    rig.frames(0, 0.05, 1000, 2);
    const Bytes before = rig.dev.engine().read_algo(2);
    CHECK(before != Bytes(before.size(), std::byte{0}));
    a = rig.cmd("deploy-policy", {{"source", iterate3}, {"policy_id", "iterate3"}});
    REQUIRE(a.ok);
    CHECK(a.result["algo_map_created"] == false);
    CHECK(rig.dev.engine().read_algo(2) == before);

    // rule 1 violation: stops at lint, no verifier log
    a = rig.cmd("deploy-policy", {{"source", read_file("tests/fixtures/lint/02_unchecked_state_index.rcp")}});
    CHECK_FALSE(a.ok);
    CHECK(a.error["stage"] == "lint");
    CHECK(a.error["diagnostics"].size() == 3);
    CHECK_FALSE(a.verifier_log.has_value());

    // lint clean, over the instruction budget
    a = rig.cmd("deploy-policy", {{"source", read_file("tests/fixtures/lint/05_unbounded_instructions.rcp")}});
    CHECK_FALSE(a.ok);
    CHECK(a.error["stage"] == "verify");
    REQUIRE(a.verifier_log.has_value());
    CHECK(a.verifier_log->size() <= 3072);
    CHECK(a.verifier_log->find("result: rejected") != std::string::npos);

    a = rig.cmd("deploy-policy", {{"source", "state s[4]; write_rate(("}});
    CHECK(a.error["stage"] == "parse");

    // failed deploys left the active program alone
    CHECK(rig.dev.engine().program_id() == "iterate3");

    a = rig.cmd("deploy-policy", {{"native", "minstrel"}, {"policy_id", "m"}});
    REQUIRE(a.ok);
    CHECK(rig.dev.engine().program_id() == "m");
    REQUIRE(rig.cmd("detach-policy").ok);
    CHECK(rig.dev.engine().program() == nullptr);
}

TEST_CASE("telemetry window per snapshot")
{
    for (const auto& [fps, expect] : std::vector<std::pair<int, std::size_t>>{{500, 500}, {1000, 1000}, {10000, 4096}}) {
        Rig rig;
        REQUIRE(rig.cmd("enable-telemetry", {{"interval_s", 1.0}}).ok);
        for (int s = 0; s < 10; ++s) {
            rig.frames(s, s + 1, fps);
            rig.dev.poll_streams(secs(s + 1));
        }
        REQUIRE(rig.telemetry.size() == 10);
        for (const auto& m : rig.telemetry) CHECK(m["count"] == expect);
        CHECK(rig.telemetry[3]["entries"].size() == expect);
        REQUIRE(rig.stats.size() == 2);
        CHECK(rig.stats[0]["window_frames"] == 5 * expect);
        CHECK(rig.stats[0]["stations"]["1"]["frames"] == 5 * expect);

        REQUIRE(rig.cmd("disable-telemetry").ok);
        rig.frames(10, 11, fps);
        rig.dev.poll_streams(secs(11));
        rig.dev.poll_streams(secs(15));
        CHECK(rig.telemetry.size() == 10);
        CHECK(rig.stats.size() == 2);
    }
}

TEST_CASE("acks never carry stream payloads")
{
    Rig rig;
    REQUIRE(rig.cmd("enable-telemetry").ok);
    rig.frames(0, 1, 100);
    rig.dev.poll_streams(secs(1));
    REQUIRE(rig.telemetry.size() == 1);
    const auto a = rig.cmd("get-stats");
    REQUIRE(a.ok);
    const std::string dump = json(a).dump();
    CHECK(dump.find("\"entries\"") == std::string::npos);
    CHECK(dump.find("\"seq\"") == std::string::npos);
    CHECK(a.result["stations"]["1"]["tx_total"] == 64);  // one flush
}

TEST_CASE("teardown examples")
{
    Rig rig;
    const auto pre = rig.dev.config_snapshot();
    CHECK(rig.cmd("session-teardown").result["reverted"] == 0);
    CHECK(rig.dev.config_snapshot() == pre);

    rig.cmd("config-set", {{"key", "a"}, {"value", "1"}});
    rig.cmd("config-set", {{"key", "b"}, {"value", "2"}});
    rig.cmd("config-set", {{"key", "c"}, {"value", "3"}});
    rig.cmd("config-set", {{"key", "a"}, {"value", "4"}});
    CHECK(rig.cmd("session-teardown").result["reverted"] == 4);
    CHECK(rig.dev.config_snapshot() == pre);

    rig.cmd("config-set", {{"key", "keep"}, {"value", "yes"}});
    rig.cmd("config-set", {{"key", "drop"}, {"value", "no"}});
    CHECK(rig.cmd("config-persist", {{"key", "keep"}}).result["persisted"] == 1);
    const auto a = rig.cmd("session-teardown");
    CHECK(a.result["skipped_persisted"] == 1);
    const auto post = rig.dev.config_snapshot();
    CHECK(post.at("cfg:keep") == "yes");
    CHECK(post.count("cfg:drop") == 0);

    rig.cmd("config-set", {{"key", "keep"}, {"value", "changed"}});
    auto r = rig.cmd("config-revert", {{"key", "keep"}});
    CHECK(r.result["reverted"] == true);
    CHECK(r.result["value"] == "yes");
}

TEST_CASE("undo restores the pre-session configuration under random sessions")
{
    Rng rng(2024);
    const std::vector<std::string> cfg_keys = {"wifi.channel", "wifi.txpower", "radio.htmode", "net.ip", "log.level"};
    const std::vector<std::string> other_keys = {"policy", "program", "telemetry.enabled", "telemetry.interval_s",
                                                 "ratemap.1", "ratemap.2"};
    int persists = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Rig rig;
        // some state that predates the session
        rig.cmd("config-set", {{"key", "wifi.channel"}, {"value", "36"}});
        rig.cmd("set-policy", {{"mode", "fixed"}, {"mcs", 2}});
        rig.cmd("session-teardown");
        rig.cmd("config-set", {{"key", "wifi.channel"}, {"value", "36"}});
        rig.cmd("config-persist", {{"key", "wifi.channel"}});
        rig.cmd("set-policy", {{"mode", "fixed"}, {"mcs", 2}});
        rig.cmd("config-persist", {{"undo_key", "policy"}});

        auto expected = rig.dev.config_snapshot();
        auto follow = [&](const std::string& key) {
            const auto now = rig.dev.config_snapshot();
            if (now.count(key)) {
                expected[key] = now.at(key);
            } else {
                expected.erase(key);
            }
        };
        for (int step = 0; step < 50; ++step) {
            const std::string& ck = cfg_keys[rng.below(cfg_keys.size())];
            switch (rng.below(11)) {
            case 0:
            case 1:
                rig.cmd("config-set", {{"key", ck}, {"value", std::to_string(rng.below(100))}});
                break;
            case 2:
                rig.cmd("set-policy", {{"mode", "fixed"}, {"mcs", rng.below(8)}});
                break;
            case 3:
                rig.cmd("set-rate", {{"mcs", rng.below(8)}, {"wcid", 1 + rng.below(4)}});
                break;
            case 4:
                rig.cmd("write-rate-map", {{"wcid", 1 + rng.below(2)}, {"rate", rng.below(8)}});
                break;
            case 5:
                rig.cmd(rng.below(2) ? "enable-telemetry" : "disable-telemetry",
                        {{"interval_s", 0.5 + static_cast<double>(rng.below(4))}});
                break;
            case 6:
                rig.cmd("deploy-policy", {{"native", rng.below(2) ? "minstrel" : "iterate3"},
                                          {"policy_id", "p" + std::to_string(rng.below(3))}});
                break;
            case 7:
                rig.cmd("detach-policy");
                break;
            case 8:
                if (rng.below(2)) {
                    rig.cmd("config-revert", {{"key", ck}});
                } else {
                    rig.cmd("config-revert", {{"undo_key", other_keys[rng.below(other_keys.size())]}});
                }
                break;
            default:
                if (rng.below(4) == 0) {
                    const std::string& k = other_keys[rng.below(other_keys.size())];
                    rig.cmd("config-persist", {{"undo_key", k}});
                    if (k == "policy" || k == "program") {
                        follow("policy");
                        follow("program");
                    } else {
                        follow(k);
                    }
                } else {
                    rig.cmd("config-persist", {{"key", ck}});
                    follow("cfg:" + ck);
                }
                ++persists;
                break;
            }
        }
        const auto td = rig.cmd("session-teardown");
        INFO(json(td).dump());
        REQUIRE(td.ok);
        const auto post = rig.dev.config_snapshot();
        if (post != expected) {
            for (const auto& [k, v] : expected) INFO(k << " expected " << v << " got " << (post.count(k) ? post.at(k) : "<absent>"));
            FAIL_CHECK("trial " << trial << " did not restore");
            break;
        }
    }
    CHECK(persists > 1000);
}

TEST_CASE("workloads run on the device and can be stopped")
{
    Rig rig;
    REQUIRE(rig.cmd("set-policy", {{"mode", "fixed"}, {"mcs", 4}}).ok);
    REQUIRE(rig.cmd("enable-telemetry").ok);
    auto a = rig.cmd("start-workload", {{"kind", "voip"}, {"duration_s", 3.0}});
    REQUIRE(a.ok);
    CHECK(rig.cmd("start-workload", {{"kind", "voip"}}).error["code"] == "busy");
    rig.dev.wait_workload();
    REQUIRE(rig.workload.size() == 1);
    CHECK(rig.workload[0]["ok"] == true);
    CHECK(rig.workload[0]["result"]["packets_sent"] == 150);
    CHECK(rig.telemetry.size() >= 2);  // streams tick off the link clock
    for (const auto& m : rig.telemetry) CHECK(m["count"].get<int>() <= 4096);

    a = rig.cmd("start-workload", {{"kind", "peak_throughput"}, {"duration_s", 1e6}});
    REQUIRE(a.ok);
    a = rig.cmd("stop-workload");
    REQUIRE(a.ok);
    CHECK(a.result["stopped"] == true);
    CHECK(rig.workload.size() == 2);
    CHECK(rig.workload[1]["result"]["stopped_early"] == true);
    CHECK(rig.cmd("start-workload", {{"kind", "tcp"}}).error["field"] == "kind");
}

TEST_CASE("socket transport carries commands, acks and streams")
{
    Bus bus;
    Device dev(bus, DeviceOptions{});
    SocketServer server(bus);
    server.start();
    REQUIRE(server.port() != 0);
    SocketClient client("127.0.0.1", server.port());

    auto ack = client.request("rc/dev0/set-policy", {{"mode", "fixed"}, {"mcs", 7}}, "s1");
    REQUIRE(ack);
    CHECK((*ack)["ok"] == true);
    CHECK((*ack)["correlation_id"] == "s1");
    {
        std::lock_guard lock(dev.mutex());
        CHECK(dev.engine().get_rate(1).mcs == 7);
    }

    ack = client.request("rc/dev0/frobnicate", json::object(), "s2");
    REQUIRE(ack);
    CHECK((*ack)["error"]["code"] == "unknown-topic");
    ack = client.request("rc/nodev/set-policy", json::object(), "s3");
    REQUIRE(ack);
    CHECK((*ack)["error"]["code"] == "unknown-topic");

    ack = client.request("rc/dev0/enable-telemetry", json::object(), "s4");
    REQUIRE(ack);
    dev.poll_streams(secs(1.0));
    bool got = false;
    while (auto m = client.read(std::chrono::milliseconds(500))) {
        if ((*m)["topic"] == "rc/dev0/telemetry") got = true;
    }
    CHECK(got);
    server.stop();
}

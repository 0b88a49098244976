// rclab command-line front end.
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rclab/control/device.hpp"
#include "rclab/control/socket.hpp"
#include "rclab/harness/algorithms.hpp"
#include "rclab/harness/experiment.hpp"
#include "rclab/harness/noise_demo.hpp"
#include "rclab/harness/scenario.hpp"
#include "rclab/harness/sweep.hpp"
#include "rclab/script/analysis.hpp"
#include "rclab/util/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rclab;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string scenario;
    std::string out;
    std::string format = "json";
};

std::atomic<bool> g_interrupted{false};

harness::Scenario load(const Globals& g)
{
    auto s = g.scenario.empty() ? harness::default_scenario() : harness::load_scenario(g.scenario);
    if (g.seed) s.seed = *g.seed;
    return s;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes `text` to <out>/<name> when --out is set, else to stdout.
void emit(const Globals& g, const std::string& name, const std::string& text)
{
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    fs::create_directories(g.out);
    const auto path = fs::path(g.out) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
    std::cerr << "wrote " << path.string() << "\n";
}

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& ep)
{
    const auto colon = ep.rfind(':');
    if (colon == std::string::npos) return {"127.0.0.1", static_cast<std::uint16_t>(std::stoi(ep))};
    return {ep.substr(0, colon), static_cast<std::uint16_t>(std::stoi(ep.substr(colon + 1)))};
}

int cmd_ab(const Globals& g, const std::vector<std::string>& algorithms, std::optional<std::uint32_t> pairs,
           unsigned threads)
{
    auto s = load(g);
    if (!algorithms.empty()) s.algorithms = algorithms;
    if (pairs) s.pairs = *pairs;
    if (s.pairs < 1) throw std::invalid_argument("--pairs must be >= 1");
    const auto report = harness::run_ab_test(s, {threads});
    if (g.out.empty()) {
        if (g.format == "csv") {
            std::cout << harness::scores_csv(report);
        } else {
            std::cout << json(report).dump(2) << "\n";
        }
        return 0;
    }
    for (const auto& p : harness::emit_report(report, g.format, g.out)) std::cerr << "wrote " << p.string() << "\n";
    std::cerr << "algorithm  workload  median  score\n";
    for (const auto& c : report.cells) {
        std::cerr << "  " << c.algorithm << "  " << c.workload << "  " << c.median << "  " << c.score << "\n";
    }
    return 0;
}

int cmd_sweep(const Globals& g, std::uint32_t frames_per_rate, std::uint32_t cycles, std::optional<double> rssi)
{
    auto s = load(g);
    if (rssi) s.channel = {{"trace", {{"kind", "constant"}, {"rssi_dbm", *rssi}}}};
    PolicyEngine engine;
    workloads::SimLink link(engine, s.link_config(s.seed), mix_seed(s.seed, 0));
    const auto r = harness::sweep_all_rates(link, frames_per_rate, cycles, s.transport.payload_bytes);
    if (g.format == "csv") {
        emit(g, "sweep.csv", harness::sweep_csv(r));
    } else {
        emit(g, "sweep.json", harness::to_json(r).dump(2) + "\n");
    }
    return 0;
}

int cmd_demo_noise(const Globals& g, harness::NoiseDemoOptions o)
{
    if (g.seed) o.seed = *g.seed;
    const auto r = harness::scoring_noise_demo(o);
    std::cerr << "naive scorer picked the worse candidate in " << r.naive_pick_error_rate * 100.0 << "% of "
              << o.trials << " trials; normalized scorer in " << r.normalized_pick_error_rate * 100.0 << "%\n";
    if (g.format == "csv") {
        emit(g, "noise_demo.csv", harness::noise_demo_csv(r));
    } else {
        emit(g, "noise_demo.json", harness::to_json(r).dump(2) + "\n");
    }
    return 0;
}

int cmd_lint(const std::string& file, bool with_verify)
{
    const auto source = read_file(file);
    std::shared_ptr<const script::Program> program;
    try {
        program = script::parse(source, fs::path(file).stem().string());
    } catch (const script::ParseError& e) {
        std::cout << file << ":" << e.line() << ":" << e.column() << ": parse error: " << e.detail() << "\n";
        return 2;
    }
    const auto diags = script::lint(*program);
    for (const auto& d : diags) std::cout << file << ":" << d.line << ": rule " << d.rule << ": " << d.message << "\n";
    int status = diags.empty() ? 0 : 1;
    if (with_verify) {
        const auto report = script::verify(*program);
        std::cout << (report.ok ? "verifier: accepted" : "verifier: rejected") << " (instruction estimate "
                  << report.instruction_estimate << ")\n";
        if (!report.log.empty()) std::cout << report.log << (report.log.back() == '\n' ? "" : "\n");
        if (!report.ok) status = status == 0 ? 3 : status;
    }
    if (status == 0) std::cout << file << ": clean\n";
    return status;
}

int cmd_deploy(const Globals& g, const std::string& file, const std::string& policy_id, const std::string& connect,
               const std::string& device)
{
    const json payload = {{"source", read_file(file)},
                          {"policy_id", policy_id.empty() ? fs::path(file).stem().string() : policy_id}};
    json ack;
    if (!connect.empty()) {
        const auto [host, port] = split_endpoint(connect);
        control::SocketClient client(host, port);
        auto reply = client.request("rc/" + device + "/deploy-policy", payload, "cli-deploy");
        if (!reply) throw std::runtime_error("no ack from " + connect);
        ack = *reply;
    } else {
        control::Bus bus;
        control::DeviceOptions opts;
        opts.name = device;
        if (g.seed) opts.seed = *g.seed;
        control::Device dev(bus, opts);
        ack = dev.handle_command({"rc/" + device + "/deploy-policy", payload, "cli-deploy"});
    }
    std::cout << ack.dump(2) << "\n";
    return ack.value("ok", false) ? 0 : 1;
}

int cmd_run_workload(const Globals& g, const std::string& kind, const std::string& algorithm, double duration)
{
    auto s = load(g);
    auto spec = harness::workload_from_json(kind, s.sample_duration_s);
    if (duration > 0) spec.duration_s = duration;
    spec.validate();
    PolicyEngine engine;
    harness::install_algorithm(engine, algorithm, s.base_dir);
    workloads::SimLink link(engine, s.link_config(s.seed), mix_seed(s.seed, 0));
    const auto r = workloads::run_workload(link, spec, s.transport);
    if (g.format == "csv") {
        emit(g, "workload.csv", workloads::qoe_csv_header() + "\n" + workloads::qoe_csv_row(r) + "\n");
    } else {
        emit(g, "workload.json", json(r).dump(2) + "\n");
    }
    return 0;
}

int cmd_serve(const Globals& g, const std::string& host, std::uint16_t port, std::vector<std::string> devices,
              double duration)
{
    auto s = load(g);
    if (devices.empty()) devices = {"dev0"};
    control::Bus bus;
    std::vector<std::unique_ptr<control::Device>> devs;
    for (std::size_t i = 0; i < devices.size(); ++i) {
        control::DeviceOptions o;
        o.name = devices[i];
        o.seed = mix_seed(s.seed, i);
        o.link = s.link_config(o.seed);
        devs.push_back(std::make_unique<control::Device>(bus, o));
    }
    control::SocketServer server(bus, host, port);
    server.start();
    std::cout << "listening on " << host << ":" << server.port() << "\n" << std::flush;

    std::signal(SIGINT, [](int) { g_interrupted = true; });
    std::signal(SIGTERM, [](int) { g_interrupted = true; });
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        const auto elapsed = std::chrono::steady_clock::now() - start;
        if (duration > 0 && elapsed >= std::chrono::duration<double>(duration)) break;
        // idle devices advance with wall time; running workloads drive their own clock
        for (auto& d : devs) {
            if (!d->workload_running()) d->poll_streams(std::chrono::duration_cast<phy::SimTime>(elapsed));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    for (auto& d : devs) d->wait_workload();
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rclab: rate-control policy lab"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Override the scenario seed");
    app.add_option("--scenario", g.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "Output directory (default: stdout)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));

    auto* ab = app.add_subcommand("ab", "Paired A/B test over the scenario's workloads");
    std::vector<std::string> ab_algorithms;
    std::optional<std::uint32_t> ab_pairs;
    unsigned ab_threads = 0;
    ab->add_option("-a,--algorithm", ab_algorithms, "Algorithm id (repeatable; overrides the scenario)");
    ab->add_option("--pairs", ab_pairs, "Number of paired samples");
    ab->add_option("--threads", ab_threads, "Worker threads (0 = all cores)");

    auto* sweep = app.add_subcommand("sweep", "Round-robin sweep over MCS 0-7");
    std::uint32_t frames_per_rate = 10, cycles = 100;
    std::optional<double> sweep_rssi;
    sweep->add_option("-n,--frames-per-rate", frames_per_rate)->check(CLI::PositiveNumber);
    sweep->add_option("--cycles", cycles)->check(CLI::PositiveNumber);
    sweep->add_option("--rssi", sweep_rssi, "Constant RSSI in dBm instead of the scenario trace");

    auto* demo = app.add_subcommand("demo-noise", "Naive versus RSSI-normalized scoring on a drifting channel");
    harness::NoiseDemoOptions demo_opts;
    demo->add_option("--trials", demo_opts.trials);
    demo->add_flag("--constant", demo_opts.constant_trace, "Constant RSSI instead of drift");
    demo->add_flag("--b-second", demo_opts.b_second, "Always score the worse candidate on the later epoch");
    demo->add_flag("--identical", demo_opts.identical, "Score two copies of the better candidate");
    demo->add_option("--threads", demo_opts.threads);

    auto* deploy = app.add_subcommand("deploy", "Build and deploy a policy program");
    std::string deploy_file, deploy_id, deploy_connect, deploy_device = "dev0";
    deploy->add_option("file", deploy_file)->required()->check(CLI::ExistingFile);
    deploy->add_option("--policy-id", deploy_id);
    deploy->add_option("--connect", deploy_connect, "host:port of a running `rclab serve`");
    deploy->add_option("--device", deploy_device);

    auto* lint = app.add_subcommand("lint", "Lint a policy program");
    std::string lint_file;
    bool lint_verify = false;
    lint->add_option("file", lint_file)->required()->check(CLI::ExistingFile);
    lint->add_flag("--verify", lint_verify, "Also run the verifier");

    auto* run = app.add_subcommand("run-workload", "Run one workload under one algorithm");
    std::string run_kind = "peak_throughput", run_algorithm = "minstrel";
    double run_duration = 0.0;
    run->add_option("-k,--kind", run_kind);
    run->add_option("-a,--algorithm", run_algorithm);
    run->add_option("--duration", run_duration, "Seconds (peak_throughput, voip)");

    auto* serve = app.add_subcommand("serve", "Run devices behind the line-delimited socket transport");
    std::string serve_host = "127.0.0.1";
    std::uint16_t serve_port = 0;
    std::vector<std::string> serve_devices;
    double serve_duration = 0.0;
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port, "0 picks a free port");
    serve->add_option("--device", serve_devices, "Device name (repeatable)");
    serve->add_option("--duration", serve_duration, "Exit after this many seconds (0 = until interrupted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ab) return cmd_ab(g, ab_algorithms, ab_pairs, ab_threads);
        if (*sweep) return cmd_sweep(g, frames_per_rate, cycles, sweep_rssi);
        if (*demo) return cmd_demo_noise(g, demo_opts);
        if (*deploy) return cmd_deploy(g, deploy_file, deploy_id, deploy_connect, deploy_device);
        if (*lint) return cmd_lint(lint_file, lint_verify);
        if (*run) return cmd_run_workload(g, run_kind, run_algorithm, run_duration);
        if (*serve) return cmd_serve(g, serve_host, serve_port, serve_devices, serve_duration);
    } catch (const harness::AlgorithmRejected& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

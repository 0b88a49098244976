#include "rclab/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rclab/harness/algorithms.hpp"
#include "rclab/util/rng.hpp"

namespace rclab::harness {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> workload_labels(const Scenario& s)
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& w : s.workloads) {
        std::string label = workloads::to_string(w.kind);
        for (int i = 2; seen.count(label) != 0; ++i) label = workloads::to_string(w.kind) + "#" + std::to_string(i);
        seen.insert(label);
        out.push_back(label);
    }
    return out;
}

double oriented(double v, bool higher_is_better)
{
    if (higher_is_better) return std::isfinite(v) ? v : 0.0;
    if (!std::isfinite(v) || v <= 0.0) return 0.0;
    return 1.0 / v;
}

json number(double v)
{
    if (std::isfinite(v)) return v;
    return v > 0 ? json("inf") : json("-inf");
}

double number_from(const json& j)
{
    if (j.is_string()) return j.get<std::string>() == "-inf" ? -kInf : kInf;
    return j.get<double>();
}

std::string fmt(double v)
{
    if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

struct RunOut {
    double metric = 0.0;
    std::string metric_name;
    bool higher_is_better = true;
};

}  // namespace

double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    const double a = v[n / 2 - 1], b = v[n / 2];
    if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
    return (a + b) / 2.0;
}

std::uint64_t channel_hash(const phy::ChannelModel& model, double horizon_s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto steps = static_cast<std::int64_t>(std::ceil(horizon_s * 10.0));
    for (std::int64_t i = 0; i <= steps; ++i) {
        const auto q = static_cast<std::int64_t>(std::llround(model.rssi.at(static_cast<double>(i) / 10.0) * 100.0));
        for (int b = 0; b < 8; ++b) {
            h ^= static_cast<std::uint64_t>(q >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

const Cell& Report::cell(const std::string& algorithm, const std::string& workload) const
{
    for (const auto& c : cells) {
        if (c.algorithm == algorithm && c.workload == workload) return c;
    }
    throw std::out_of_range("no cell for " + algorithm + " / " + workload);
}

void normalize(Report& report)
{
    for (const auto& w : report.workloads) {
        double best = 0.0;
        for (const auto& c : report.cells) {
            if (c.workload == w) best = std::max(best, oriented(c.median, c.higher_is_better));
        }
        for (auto& c : report.cells) {
            if (c.workload != w) continue;
            // every algorithm scored zero: they tie for best
            c.score = best > 0.0 ? oriented(c.median, c.higher_is_better) / best : 1.0;
        }
    }
}

Report run_ab_test(const Scenario& scenario, const AbOptions& options)
{
    // Fail fast on anything that will not deploy.
    for (const auto& a : scenario.algorithms) {
        PolicyEngine probe;
        install_algorithm(probe, a, scenario.base_dir);
    }

    const auto labels = workload_labels(scenario);
    const std::size_t n_alg = scenario.algorithms.size();
    const std::size_t n_wl = scenario.workloads.size();
    const std::uint32_t n_pairs = scenario.pairs;

    std::vector<PairInfo> info(n_pairs);
    // results[pair][workload][algorithm]
    std::vector<std::vector<std::vector<RunOut>>> results(
        n_pairs, std::vector<std::vector<RunOut>>(n_wl, std::vector<RunOut>(n_alg)));

    auto run_pair = [&](std::uint32_t p) {
        PairInfo& pi = info[p];
        pi.index = p;
        pi.seed = mix_seed(scenario.seed, p);
        for (std::size_t w = 0; w < n_wl; ++w) {
            const auto& spec = scenario.workloads[w];
            const std::uint64_t link_seed = mix_seed(pi.seed, 1000 + w);
            const auto cfg = scenario.link_config(pi.seed);
            const double horizon = std::max(spec.time_cap_s, spec.duration_s);
            const std::uint64_t hash = channel_hash(cfg.channel, horizon);
            pi.link_seeds.push_back(link_seed);
            pi.channel_hashes.push_back(hash);
            for (std::size_t a = 0; a < n_alg; ++a) {
                PolicyEngine engine;
                install_algorithm(engine, scenario.algorithms[a], scenario.base_dir);
                const auto run_cfg = scenario.link_config(pi.seed);
                if (channel_hash(run_cfg.channel, horizon) != hash) {
                    throw std::logic_error("pairing broken: channel differs within pair " + std::to_string(p));
                }
                workloads::SimLink link(engine, run_cfg, link_seed);
                const auto r = workloads::run_workload(link, spec, scenario.transport);
                results[p][w][a] = RunOut{r.metric, r.metric_name, r.higher_is_better};
            }
        }
    };

    unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, n_pairs);
    std::atomic<std::uint32_t> next{0};
    std::mutex err_mu;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const std::uint32_t p = next.fetch_add(1);
            if (p >= n_pairs) return;
            try {
                run_pair(p);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!error) error = std::current_exception();
                next.store(n_pairs);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    Report report;
    report.scenario = scenario.name;
    report.seed = scenario.seed;
    report.pairs = n_pairs;
    report.algorithms = scenario.algorithms;
    report.workloads = labels;
    report.pair_info = std::move(info);
    report.plan = scenario_to_json(scenario);
    for (std::size_t a = 0; a < n_alg; ++a) {
        for (std::size_t w = 0; w < n_wl; ++w) {
            Cell c;
            c.algorithm = scenario.algorithms[a];
            c.workload = labels[w];
            c.metric_name = results[0][w][a].metric_name;
            c.higher_is_better = results[0][w][a].higher_is_better;
            for (std::uint32_t p = 0; p < n_pairs; ++p) c.values.push_back(results[p][w][a].metric);
            c.median = median(c.values);
            report.cells.push_back(std::move(c));
        }
    }
    normalize(report);
    return report;
}

void to_json(json& j, const Report& r)
{
    json cells = json::array();
    for (const auto& c : r.cells) {
        json values = json::array();
        for (double v : c.values) values.push_back(number(v));
        cells.push_back({{"algorithm", c.algorithm},
                         {"workload", c.workload},
                         {"metric", c.metric_name},
                         {"higher_is_better", c.higher_is_better},
                         {"median", number(c.median)},
                         {"score", c.score},
                         {"values", values}});
    }
    json pairs = json::array();
    for (const auto& p : r.pair_info) {
        pairs.push_back({{"index", p.index},
                         {"seed", p.seed},
                         {"link_seeds", p.link_seeds},
                         {"channel_hashes", p.channel_hashes}});
    }
    j = json{{"scenario", r.scenario},     {"seed", r.seed},          {"pairs", r.pairs},
             {"algorithms", r.algorithms}, {"workloads", r.workloads}, {"cells", cells},
             {"pair_info", pairs},         {"plan", r.plan}};
}

void from_json(const json& j, Report& r)
{
    r = Report{};
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.pairs = j.at("pairs").get<std::uint32_t>();
    r.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    r.workloads = j.at("workloads").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) {
        Cell cell;
        cell.algorithm = c.at("algorithm").get<std::string>();
        cell.workload = c.at("workload").get<std::string>();
        cell.metric_name = c.at("metric").get<std::string>();
        cell.higher_is_better = c.at("higher_is_better").get<bool>();
        cell.median = number_from(c.at("median"));
        cell.score = c.at("score").get<double>();
        for (const auto& v : c.at("values")) cell.values.push_back(number_from(v));
        r.cells.push_back(std::move(cell));
    }
    for (const auto& p : j.at("pair_info")) {
        PairInfo pi;
        pi.index = p.at("index").get<std::uint32_t>();
        pi.seed = p.at("seed").get<std::uint64_t>();
        pi.link_seeds = p.at("link_seeds").get<std::vector<std::uint64_t>>();
        pi.channel_hashes = p.at("channel_hashes").get<std::vector<std::uint64_t>>();
        r.pair_info.push_back(std::move(pi));
    }
    r.plan = j.at("plan");
}

std::string scores_csv(const Report& report)
{
    std::ostringstream os;
    os << "algorithm,workload,metric,higher_is_better,median,score\n";
    for (const auto& c : report.cells) {
        os << c.algorithm << ',' << c.workload << ',' << c.metric_name << ',' << (c.higher_is_better ? 1 : 0) << ','
           << fmt(c.median) << ',' << fmt(c.score) << '\n';
    }
    return os.str();
}

std::string raw_csv(const Report& report)
{
    std::ostringstream os;
    os << "algorithm,workload,pair,pair_seed,link_seed,channel_hash,metric,value\n";
    for (const auto& c : report.cells) {
        const auto w = static_cast<std::size_t>(
            std::find(report.workloads.begin(), report.workloads.end(), c.workload) - report.workloads.begin());
        for (std::size_t p = 0; p < c.values.size(); ++p) {
            const auto& pi = report.pair_info.at(p);
            os << c.algorithm << ',' << c.workload << ',' << p << ',' << pi.seed << ',' << pi.link_seeds.at(w) << ','
               << pi.channel_hashes.at(w) << ',' << c.metric_name << ',' << fmt(c.values[p]) << '\n';
        }
    }
    return os.str();
}

std::vector<std::filesystem::path> emit_report(const Report& report, const std::string& format,
                                               const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
        out << text;
        if (!out) throw std::runtime_error("write failed for " + p.string());
    };
    if (format == "json") {
        const auto p = dir / "report.json";
        write(p, json(report).dump(2) + "\n");
        return {p};
    }
    if (format == "csv") {
        const auto s = dir / "scores.csv";
        const auto r = dir / "raw.csv";
        write(s, scores_csv(report));
        write(r, raw_csv(report));
        return {s, r};
    }
    throw std::invalid_argument("unknown report format '" + format + "'");
}

}  // namespace rclab::harness

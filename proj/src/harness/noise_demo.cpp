#include "rclab/harness/noise_demo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "rclab/util/rng.hpp"
#include "rclab/workloads/link.hpp"

namespace rclab::harness {

namespace {

constexpr std::uint32_t kPayload = 1500;
constexpr std::uint8_t kWcid = 1;

std::uint8_t best_mcs(const phy::ChannelModel& model, double rssi, int retry_limit)
{
    std::uint8_t best = 0;
    double best_g = -1.0;
    for (std::uint8_t m = 0; m < phy::kMcsCount; ++m) {
        const double g = workloads::expected_fixed_goodput_mbps(model, RateSpec::ht(m), rssi, kPayload, retry_limit);
        if (g > best_g) {
            best_g = g;
            best = m;
        }
    }
    return best;
}

std::uint8_t apply_offset(std::uint8_t a, int offset)
{
    if (offset == 0) return a;
    int m = a + offset;
    if (m < 0) m = a - offset;  // MCS0 oracle: step the other way
    return static_cast<std::uint8_t>(std::clamp(m, 0, phy::kMcsCount - 1));
}

EpochResult run_epoch(const phy::ChannelModel& base, int offset, double start_dbm, double slope, double t0,
                      double epoch_s, bool constant, double constant_dbm, std::uint64_t seed)
{
    phy::ChannelModel model = base;
    if (constant) {
        model.rssi = phy::RssiTrace(phy::ConstantTrace{constant_dbm});
    } else {
        model.rssi = phy::RssiTrace(phy::LinearDriftTrace{start_dbm + slope * t0, slope});
    }
    PolicyEngine engine;
    auto genie = std::make_shared<GenieController>(base, offset);
    engine.attach_program(genie, "genie");
    engine.set_policy(ProgramPolicy{"genie"});
    // first frame goes out at the genie's pick for the starting RSSI
    engine.write_rate_map(kWcid, RateMapEntry::from_rate(RateSpec::ht(genie->pick(model.rssi.at(0.0)))));

    workloads::LinkConfig cfg;
    cfg.channel = model;
    cfg.wcid = kWcid;
    workloads::SimLink link(engine, cfg, seed);
    std::uint64_t delivered = 0;
    double rssi_sum = 0.0;
    std::uint64_t n = 0;
    while (link.seconds() < epoch_s) {
        const auto s = link.send(kPayload);
        if (s.outcome.success) ++delivered;
        rssi_sum += std::round(s.rssi_dbm);  // the integer signal the radio reports
        ++n;
    }
    EpochResult e;
    e.start_s = t0;
    e.mean_rssi_dbm = n > 0 ? rssi_sum / static_cast<double>(n) : 0.0;
    e.goodput_mbps = static_cast<double>(delivered) * kPayload * 8.0 / link.seconds() / 1e6;
    e.oracle_goodput_mbps = workloads::oracle_goodput_mbps(base, e.mean_rssi_dbm, kPayload);
    e.normalized = e.oracle_goodput_mbps > 0 ? e.goodput_mbps / e.oracle_goodput_mbps : 0.0;
    return e;
}

}  // namespace

GenieController::GenieController(phy::ChannelModel model, int offset, int retry_limit)
    : model_(std::move(model)), offset_(offset), retry_limit_(retry_limit)
{
    for (int s = -128; s < 128; ++s) by_signal_[static_cast<std::size_t>(s + 128)] = pick(s);
}

std::uint8_t GenieController::pick(double rssi_dbm) const
{
    return apply_offset(best_mcs(model_, rssi_dbm, retry_limit_), offset_);
}

void GenieController::on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine)
{
    const auto wcid = static_cast<std::uint8_t>(ctx.wcid);
    const auto s = std::clamp<std::int64_t>(ctx.signal, -128, 127);
    engine.write_rate_map(wcid, RateMapEntry::from_rate(RateSpec::ht(by_signal_[static_cast<std::size_t>(s + 128)])));
}

double grid_goodput_mbps(const phy::ChannelModel& model, int offset)
{
    double sum = 0.0;
    int n = 0;
    for (double r = -90.0; r <= -55.0 + 1e-9; r += 0.5, ++n) {
        const auto m = apply_offset(best_mcs(model, r, phy::kDefaultRetryLimit), offset);
        sum += workloads::expected_fixed_goodput_mbps(model, RateSpec::ht(m), r, kPayload);
    }
    return sum / n;
}

NoiseDemoResult scoring_noise_demo(const NoiseDemoOptions& options)
{
    const auto base = phy::ChannelModel::standard();
    const int offset_b = options.identical ? 0 : -1;

    NoiseDemoResult out;
    out.options = options;
    out.oracle_a_mbps = grid_goodput_mbps(base, 0);
    out.oracle_b_mbps = grid_goodput_mbps(base, offset_b);
    out.series.resize(options.trials);

    auto run_trial = [&](std::uint32_t i) {
        TrialResult t;
        t.trial = i;
        t.seed = mix_seed(options.seed, i);
        Rng rng(t.seed);
        auto between = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
        t.start_dbm = between(options.start_min_dbm, options.start_max_dbm);
        t.slope_db_per_s = between(options.slope_min_db_per_s, options.slope_max_db_per_s);
        t.epoch_s = between(options.epoch_min_s, options.epoch_max_s);
        t.b_first = options.b_second ? false : rng.bernoulli(0.5);
        const double t_a = t.b_first ? t.epoch_s : 0.0;
        const double t_b = t.b_first ? 0.0 : t.epoch_s;
        t.a = run_epoch(base, 0, t.start_dbm, t.slope_db_per_s, t_a, t.epoch_s, options.constant_trace,
                        options.constant_rssi_dbm, mix_seed(t.seed, 1));
        t.b = run_epoch(base, offset_b, t.start_dbm, t.slope_db_per_s, t_b, t.epoch_s, options.constant_trace,
                        options.constant_rssi_dbm, mix_seed(t.seed, 2));
        t.b.candidate_b = true;
        t.naive_picks_b = t.b.goodput_mbps > t.a.goodput_mbps;
        t.normalized_picks_b = t.b.normalized > t.a.normalized;
        out.series[i] = t;
    };

    unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::max(1u, std::min<unsigned>(threads, options.trials));
    std::atomic<std::uint32_t> next{0};
    auto worker = [&] {
        for (std::uint32_t i; (i = next.fetch_add(1)) < options.trials;) run_trial(i);
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::uint32_t naive_b = 0, norm_b = 0;
    for (const auto& t : out.series) {
        naive_b += t.naive_picks_b ? 1 : 0;
        norm_b += t.normalized_picks_b ? 1 : 0;
    }
    if (options.trials > 0) {
        out.naive_pick_error_rate = static_cast<double>(naive_b) / options.trials;
        out.normalized_pick_error_rate = static_cast<double>(norm_b) / options.trials;
    }
    return out;
}

nlohmann::json to_json(const NoiseDemoResult& r)
{
    auto epoch = [](const EpochResult& e) {
        return nlohmann::json{{"start_s", e.start_s},
                              {"mean_rssi_dbm", e.mean_rssi_dbm},
                              {"goodput_mbps", e.goodput_mbps},
                              {"oracle_goodput_mbps", e.oracle_goodput_mbps},
                              {"normalized", e.normalized}};
    };
    nlohmann::json series = nlohmann::json::array();
    for (const auto& t : r.series) {
        series.push_back({{"trial", t.trial},
                          {"seed", t.seed},
                          {"start_dbm", t.start_dbm},
                          {"slope_db_per_s", t.slope_db_per_s},
                          {"epoch_s", t.epoch_s},
                          {"b_first", t.b_first},
                          {"a", epoch(t.a)},
                          {"b", epoch(t.b)},
                          {"naive_picks_b", t.naive_picks_b},
                          {"normalized_picks_b", t.normalized_picks_b}});
    }
    const auto& o = r.options;
    return {{"options",
             {{"seed", o.seed},
              {"trials", o.trials},
              {"start_dbm", {o.start_min_dbm, o.start_max_dbm}},
              {"slope_db_per_s", {o.slope_min_db_per_s, o.slope_max_db_per_s}},
              {"epoch_s", {o.epoch_min_s, o.epoch_max_s}},
              {"constant_trace", o.constant_trace},
              {"constant_rssi_dbm", o.constant_rssi_dbm},
              {"b_second", o.b_second},
              {"identical", o.identical}}},
            {"naive_pick_error_rate", r.naive_pick_error_rate},
            {"normalized_pick_error_rate", r.normalized_pick_error_rate},
            {"oracle_a_mbps", r.oracle_a_mbps},
            {"oracle_b_mbps", r.oracle_b_mbps},
            {"series", series}};
}

std::string noise_demo_csv(const NoiseDemoResult& r)
{
    std::ostringstream os;
    os.precision(10);
    os << "trial,seed,start_dbm,slope_db_per_s,epoch_s,b_first,a_mean_rssi_dbm,a_goodput_mbps,a_normalized,"
          "b_mean_rssi_dbm,b_goodput_mbps,b_normalized,naive_picks_b,normalized_picks_b\n";
    for (const auto& t : r.series) {
        os << t.trial << ',' << t.seed << ',' << t.start_dbm << ',' << t.slope_db_per_s << ',' << t.epoch_s << ','
           << (t.b_first ? 1 : 0) << ',' << t.a.mean_rssi_dbm << ',' << t.a.goodput_mbps << ',' << t.a.normalized
           << ',' << t.b.mean_rssi_dbm << ',' << t.b.goodput_mbps << ',' << t.b.normalized << ','
           << (t.naive_picks_b ? 1 : 0) << ',' << (t.normalized_picks_b ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace rclab::harness

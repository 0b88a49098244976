#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "rclab/harness/algorithms.hpp"
#include "rclab/harness/experiment.hpp"
#include "rclab/harness/noise_demo.hpp"
#include "rclab/harness/sweep.hpp"
#include "rclab/script/analysis.hpp"
#include "rclab/util/rng.hpp"
#include "rclab/workloads/link.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace rclab;

// JSON crosses the boundary as text; the Python package parses it.
namespace {

harness::Scenario scenario_of(const std::string& text, const std::string& base_dir)
{
    return harness::scenario_from_json(text.empty() ? json::object() : json::parse(text), base_dir);
}

std::string ab(const std::string& scenario, const std::string& base_dir, unsigned threads)
{
    py::gil_scoped_release release;
    return json(harness::run_ab_test(scenario_of(scenario, base_dir), {threads})).dump();
}

std::string run_workload(const std::string& scenario, const std::string& kind, const std::string& algorithm,
                         const std::string& base_dir)
{
    py::gil_scoped_release release;
    const auto s = scenario_of(scenario, base_dir);
    const auto spec = harness::workload_from_json(json::parse(kind), s.sample_duration_s);
    PolicyEngine engine;
    harness::install_algorithm(engine, algorithm, s.base_dir);
    workloads::SimLink link(engine, s.link_config(s.seed), mix_seed(s.seed, 0));
    return json(workloads::run_workload(link, spec, s.transport)).dump();
}

std::string sweep(double rssi_dbm, std::uint32_t frames_per_rate, std::uint32_t cycles, std::uint64_t seed)
{
    py::gil_scoped_release release;
    PolicyEngine engine;
    workloads::LinkConfig cfg;
    cfg.channel = phy::ChannelModel::standard(phy::RssiTrace(phy::ConstantTrace{rssi_dbm}));
    workloads::SimLink link(engine, cfg, seed);
    return harness::to_json(harness::sweep_all_rates(link, frames_per_rate, cycles)).dump();
}

std::string noise_demo(std::uint64_t seed, std::uint32_t trials, bool constant, bool b_second, bool identical)
{
    py::gil_scoped_release release;
    harness::NoiseDemoOptions o;
    o.seed = seed;
    o.trials = trials;
    o.constant_trace = constant;
    o.b_second = b_second;
    o.identical = identical;
    return harness::to_json(harness::scoring_noise_demo(o)).dump();
}

std::string lint(const std::string& source, bool with_verify)
{
    json out;
    try {
        const auto program = script::parse(source);
        out["diagnostics"] = script::lint(*program);
        if (with_verify) out["verifier"] = script::verify(*program);
    } catch (const script::ParseError& e) {
        out["parse_error"] = {{"line", e.line()}, {"column", e.column()}, {"message", e.detail()}};
    }
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "rclab simulator core";
    m.def("ab", &ab, py::arg("scenario"), py::arg("base_dir") = ".", py::arg("threads") = 0);
    m.def("run_workload", &run_workload, py::arg("scenario"), py::arg("kind"), py::arg("algorithm"),
          py::arg("base_dir") = ".");
    m.def("sweep", &sweep, py::arg("rssi_dbm"), py::arg("frames_per_rate"), py::arg("cycles"), py::arg("seed"));
    m.def("noise_demo", &noise_demo, py::arg("seed"), py::arg("trials"), py::arg("constant"), py::arg("b_second"),
          py::arg("identical"));
    m.def("lint", &lint, py::arg("source"), py::arg("verify"));
    m.def("oracle_mcs", [](double rssi) { return workloads::oracle_mcs(phy::ChannelModel::standard(), rssi); });

    py::register_exception<harness::AlgorithmRejected>(m, "AlgorithmRejected");
    py::register_exception<std::invalid_argument>(m, "InvalidArgument", PyExc_ValueError);
}

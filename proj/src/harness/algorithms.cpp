#include "rclab/harness/algorithms.hpp"

#include <fstream>
#include <sstream>

#include "rclab/controllers/registry.hpp"
#include "rclab/script/analysis.hpp"
#include "rclab/script/interpreter.hpp"

namespace rclab::harness {

namespace {

void attach(PolicyEngine& engine, std::shared_ptr<RateController> c, const std::string& id)
{
    if (c->state_size() > 0) engine.ensure_algo_map(c->state_size());
    engine.attach_program(std::move(c), id);
    engine.set_policy(ProgramPolicy{id});
}

}  // namespace

void install_algorithm(PolicyEngine& engine, const std::string& id, const std::filesystem::path& base_dir)
{
    if (id.rfind("fixed:", 0) == 0) {
        int mcs = -1;
        try {
            std::size_t used = 0;
            mcs = std::stoi(id.substr(6), &used);
            if (used != id.size() - 6) mcs = -1;
        } catch (const std::exception&) {
        }
        if (mcs < 0 || mcs >= phy::kMcsCount) throw std::invalid_argument("bad fixed-rate algorithm '" + id + "'");
        engine.set_policy(FixedPolicy{RateSpec::ht(static_cast<std::uint8_t>(mcs))});
        return;
    }
    if (id.size() > 4 && id.compare(id.size() - 4, 4, ".rcp") == 0) {
        std::filesystem::path p(id);
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) throw std::invalid_argument("cannot open policy file " + p.string());
        std::stringstream ss;
        ss << in.rdbuf();
        std::shared_ptr<const script::Program> program;
        try {
            program = script::parse(ss.str(), p.stem().string());
        } catch (const script::ParseError& e) {
            throw AlgorithmRejected(id, e.what());
        }
        const auto diags = script::lint(*program);
        if (!diags.empty()) {
            std::string text;
            for (const auto& d : diags) text += "line " + std::to_string(d.line) + ": rule " + std::to_string(d.rule) + ": " + d.message + "\n";
            throw AlgorithmRejected(id, text);
        }
        const auto report = script::verify(*program);
        if (!report.ok) throw AlgorithmRejected(id, report.log);
        attach(engine, std::make_shared<script::ScriptController>(program), id);
        return;
    }
    attach(engine, controllers::make_controller(id), id);
}

}  // namespace rclab::harness

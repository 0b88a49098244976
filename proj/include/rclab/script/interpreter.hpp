#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rclab/engine/policy_engine.hpp"
#include "rclab/engine/records.hpp"
#include "rclab/script/analysis.hpp"
#include "rclab/script/ast.hpp"
#include "rclab/util/bytes.hpp"

namespace rclab::script {

struct ExecResult {
    Bytes state;  // unchanged input when aborted
    std::optional<std::uint8_t> chosen;
    bool aborted = false;
    std::string reason;
    std::int64_t steps = 0;
};

/// Runs one invocation. `state` must be exactly program.state_size() bytes.
/// Exceeding `budget` or indexing out of range aborts the invocation without
/// side effects. The last write_rate with a value in 0..7 wins.
ExecResult execute(const Program& program, std::span<const std::byte> state, const TxStatusContext& ctx,
                   std::int64_t budget = kInstructionBudget);

/// A verified policy ready to attach.
struct LoadedPolicy {
    std::shared_ptr<const Program> program;
    std::vector<LintDiagnostic> lint;
    VerifierReport verifier;
};

class PolicyRejected : public std::runtime_error {
public:
    explicit PolicyRejected(VerifierReport report)
        : std::runtime_error("policy rejected by verifier"), report_(std::move(report))
    {
    }
    const VerifierReport& report() const { return report_; }

private:
    VerifierReport report_;
};

/// parse -> lint -> verify. Throws ParseError or PolicyRejected.
LoadedPolicy load_policy(const std::string& source, const std::string& name = "policy");

/// Runs a policy program per TX completion against the algorithm map.
class ScriptController final : public RateController {
public:
    explicit ScriptController(std::shared_ptr<const Program> program);

    std::string_view name() const override { return program_->name; }
    std::size_t state_size() const override { return program_->state_size(); }
    void on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine) override;

    const Program& program() const { return *program_; }
    std::uint64_t aborts() const { return aborts_; }

private:
    std::shared_ptr<const Program> program_;
    std::uint64_t aborts_ = 0;
};

}  // namespace rclab::script

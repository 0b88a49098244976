#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rclab/script/ast.hpp"

namespace rclab::script {

inline constexpr std::int64_t kInstructionBudget = 4096;
inline constexpr std::size_t kStackLimitBytes = 512;
inline constexpr std::size_t kMaxStateBytes = 64;
inline constexpr std::size_t kVerifierLogLimit = 3072;
inline constexpr int kMaxStateBranchDepth = 8;

struct LintDiagnostic {
    int rule = 0;  // 1..5
    int line = 0;
    std::string message;

    friend bool operator==(const LintDiagnostic&, const LintDiagnostic&) = default;
};

/// Static style rules:
///   1  state/scratch access indexed by a state- or ctx-derived value with no
///      dominating `if (v < K)`
///   2  loop without `#pragma unroll`
///   3  named block without `inline`
///   4  more than 8 nested conditionals testing state-derived values
///   5  state + scratch declarations exceeding 512 bytes
/// Diagnostics are sorted by line, then rule.
std::vector<LintDiagnostic> lint(const Program& program);

struct VerifierReport {
    bool ok = false;
    std::string log;  // at most 3072 bytes
    std::int64_t instruction_estimate = 0;
};

/// Load-time safety checks: instruction bound, provable array bounds,
/// constant loop trip counts, state and stack limits, name resolution.
VerifierReport verify(const Program& program);

/// Cost of a fully unrolled program under the shared instruction model.
/// Saturates at INT64_MAX; cyclic block use counts as unbounded.
std::int64_t instruction_estimate(const Program& program);

void to_json(nlohmann::json& j, const LintDiagnostic& d);
void to_json(nlohmann::json& j, const VerifierReport& r);

}  // namespace rclab::script

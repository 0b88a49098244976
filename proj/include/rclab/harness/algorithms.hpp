#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "rclab/engine/policy_engine.hpp"

namespace rclab::harness {

/// Installs an algorithm on a fresh engine. Ids:
///   "fixed:<mcs>"                     fixed rate
///   "iterate3" | "minstrel" | "hold-retest"  native controllers
///   "<path>.rcp"                      DSL program (lint must be clean)
/// Throws std::invalid_argument on unknown ids and AlgorithmRejected when a
/// DSL program fails lint or verification.
void install_algorithm(PolicyEngine& engine, const std::string& id, const std::filesystem::path& base_dir = ".");

class AlgorithmRejected : public std::runtime_error {
public:
    AlgorithmRejected(const std::string& id, std::string diagnostics)
        : std::runtime_error("algorithm '" + id + "' rejected:\n" + diagnostics), diagnostics_(std::move(diagnostics))
    {
    }
    const std::string& diagnostics() const { return diagnostics_; }

private:
    std::string diagnostics_;
};

}  // namespace rclab::harness

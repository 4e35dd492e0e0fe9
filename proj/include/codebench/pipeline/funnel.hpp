#pragma once

#include "codebench/pipeline/stages.hpp"
#include "codebench/util/jsonl.hpp"

#include <map>
#include <string>
#include <vector>

namespace codebench::pipeline {

struct StageTally {
    std::size_t entered = 0;
    std::size_t accepted = 0;
    std::size_t failed = 0;
    std::size_t regenerating = 0;
};

/// Pipeline stages in execution order.
const std::vector<std::string>& stage_order();

/// Per-step counts shaped like the construction funnel: how many examples have a target that
/// passes all tests after sandboxing and test generation, after each debug iteration, and
/// after post-processing, plus attempt-level tallies per stage.
struct FunnelReport {
    std::size_t input = 0;
    std::vector<std::size_t> passing_by_execution;  // cumulative, index = execution number
    std::size_t emitted = 0;
    std::vector<std::pair<std::string, StageTally>> stages;
    std::map<std::string, std::size_t> failures;  // "stage:reason" -> examples
    std::size_t rejected_rewrites = 0;
    std::size_t degraded = 0;
    std::size_t augmented = 0;
    std::size_t llm_calls = 0;
    std::size_t debug_executions = 0;

    [[nodiscard]] json to_json() const;
    /// Fixed-layout text table; deterministic for equal reports.
    [[nodiscard]] std::string to_text() const;
};

FunnelReport build_funnel(const std::vector<StageState>& states, std::size_t debug_iterations);

}  // namespace codebench::pipeline

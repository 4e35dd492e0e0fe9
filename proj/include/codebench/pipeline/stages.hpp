#pragma once

#include "codebench/corpus/corpus.hpp"
#include "codebench/corpus/keywords.hpp"
#include "codebench/executor/executor.hpp"
#include "codebench/llm/gateway.hpp"
#include "codebench/pipeline/checks.hpp"
#include "codebench/pipeline/example.hpp"
#include "codebench/pipeline/templates.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace codebench::pipeline {

struct StageSampling {
    std::string model;
    double temperature = 0.3;
    double top_p = 0.95;
    std::size_t n = 1;
};

struct PipelineConfig {
    std::size_t regeneration_cap = 3;
    std::size_t debug_iterations = 3;
    std::size_t augment_k = 5;
    double shrink_guard = 0.6;
    ValidationConfig validation;
    StageSampling sandbox, tests, debug, instruction;
    StageSampling augment{"", 0.3, 0.7, 5};
    std::chrono::duration<double> timeout = executor::pipeline_timeout;
    std::vector<std::string> banned_keywords = corpus::banned_keywords();
    std::size_t jobs = 1;

    /// Uses one model alias for every stage.
    void set_model(const std::string& model);
};

struct PipelineServices {
    llm::Gateway& llm;
    executor::Executor& executor;
    executor::EnvironmentManager& environments;
    const TemplateSet& templates;
};

enum class Outcome { accepted, failed, regenerating };
std::string to_string(Outcome o);

struct StageRecord {
    std::string stage;
    Outcome outcome;
    std::string reason;
};

/// Per-fragment bookkeeping: append-only history of stage attempts plus call counters.
struct StageState {
    std::string source_id;
    std::vector<StageRecord> history;
    std::map<std::string, std::size_t> llm_calls;  // per stage
    std::size_t debug_executions = 0;
    std::size_t augment_executions = 0;
    std::size_t rejected_rewrites = 0;
    std::optional<std::size_t> passed_at_execution;  // 0 = before any debugging
    bool degraded = false;
    bool augmented = false;
    bool target_changed = false;
    bool emitted = false;
    std::string failure;  // "stage:reason" once failed

    void record(const std::string& stage, Outcome outcome, const std::string& reason = {});
    [[nodiscard]] std::size_t attempts(const std::string& stage) const;
};

/// One LLM round for step 1: the rewritten module (first code block of the answer).
std::string sandbox_fragment(const corpus::SourceFragment& frag, const PipelineServices& svc, const PipelineConfig& cfg);

/// One LLM round for step 2 against an accepted program.
TestSet generate_tests(const std::string& program, const std::string& function_name, const PipelineServices& svc,
                       const PipelineConfig& cfg);

/// Result of executing a program against test sets in its own environment.
executor::AllSetsResult run_test_sets(const std::string& program, const std::vector<std::string>& tests,
                                      const PipelineServices& svc, const PipelineConfig& cfg);

struct Candidate {
    SlotSplit split;
    TestSet tests;
    [[nodiscard]] std::string program() const { return assemble(split.context, split.target); }
};

struct DebugResult {
    bool success = false;
    Candidate candidate;
    std::optional<executor::ExecutionReport> last_report;
    std::string reason;  // failure reason
};

/// Execute-and-debug loop: at most max_iter rewrites and max_iter + 1 executions. Rejected
/// rewrites (unparsable, target lost, weak tests, shrunk below the guard) are re-requested,
/// at most regeneration_cap times in total. Throws InfrastructureError on executor failure.
DebugResult debug_iterate(Candidate candidate, const std::string& function_name, const PipelineServices& svc,
                          const PipelineConfig& cfg, StageState& state);

/// Renders an execution report the way the debug prompt shows it.
std::string render_report(const executor::ExecutionReport& report);

struct InstructionResult {
    Instruction instruction;
    bool degraded = false;
};

/// Asks for the three labelled fields, re-prompts once, then falls back to the docstring.
InstructionResult generate_instruction(const Candidate& candidate, const std::string& function_name,
                                       const std::string& docstring, const PipelineServices& svc,
                                       const PipelineConfig& cfg, StageState& state);

/// One request for k candidate test sets; returns the first that passes the static check and
/// the ground truth. k = 0 is a no-op.
std::optional<TestSet> augment_tests(const Candidate& candidate, const std::string& function_name,
                                     const PipelineServices& svc, const PipelineConfig& cfg, StageState& state);

struct FilterResult {
    std::vector<EvalExample> kept;
    std::vector<std::pair<std::string, std::string>> dropped;  // (id, reason)
    std::vector<std::string> merged_dependencies;
    std::vector<std::string> overridden_pins;
};

/// Banned-keyword drop, then one shared environment with the merged dependency list and a
/// parallel re-execution of every test set. Environment failure is fatal (EnvironmentError).
FilterResult final_filter(std::vector<EvalExample> examples, const PipelineServices& svc, const PipelineConfig& cfg);

/// Keyword found in context, target or tests, if any.
std::optional<std::string> banned_keyword_in(const EvalExample& example, const std::vector<std::string>& banned);

}  // namespace codebench::pipeline

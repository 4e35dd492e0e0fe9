#include "codebench/pipeline/funnel.hpp"

#include <fmt/format.h>

namespace codebench::pipeline {

namespace {

std::string ordinal(std::size_t i)
{
    if (i % 100 >= 11 && i % 100 <= 13) return std::to_string(i) + "th";
    switch (i % 10) {
    case 1: return std::to_string(i) + "st";
    case 2: return std::to_string(i) + "nd";
    case 3: return std::to_string(i) + "rd";
    default: return std::to_string(i) + "th";
    }
}

}  // namespace

const std::vector<std::string>& stage_order()
{
    static const std::vector<std::string> order = {"intake",      "sandbox", "tests",       "debug",
                                                   "instruction", "augment", "final_filter"};
    return order;
}

FunnelReport build_funnel(const std::vector<StageState>& states, std::size_t debug_iterations)
{
    FunnelReport f;
    f.input = states.size();
    f.passing_by_execution.assign(debug_iterations + 1, 0);
    std::map<std::string, StageTally> tallies;
    for (const auto& s : states) {
        for (const auto& r : s.history) {
            auto& t = tallies[r.stage];
            ++t.entered;
            switch (r.outcome) {
            case Outcome::accepted: ++t.accepted; break;
            case Outcome::failed: ++t.failed; break;
            case Outcome::regenerating: ++t.regenerating; break;
            }
        }
        if (s.passed_at_execution) {
            for (std::size_t i = *s.passed_at_execution; i < f.passing_by_execution.size(); ++i)
                ++f.passing_by_execution[i];
        }
        if (s.emitted) ++f.emitted;
        if (!s.failure.empty()) ++f.failures[s.failure];
        f.rejected_rewrites += s.rejected_rewrites;
        f.degraded += s.degraded;
        f.augmented += s.augmented;
        for (const auto& [stage, n] : s.llm_calls) f.llm_calls += n;
        f.debug_executions += s.debug_executions;
    }
    for (const auto& name : stage_order()) f.stages.emplace_back(name, tallies[name]);
    return f;
}

json FunnelReport::to_json() const
{
    json steps = json::array();
    steps.push_back({{"step", "Input"}, {"examples", input}});
    for (std::size_t i = 0; i < passing_by_execution.size(); ++i) {
        std::string label = i == 0 ? "Sandboxing & Test Gen" : ordinal(i) + " Exec & Debug Iter";
        steps.push_back({{"step", label}, {"examples", passing_by_execution[i]}});
    }
    steps.push_back({{"step", "Post-processing"}, {"examples", emitted}});
    json stage_json = json::object();
    for (const auto& [name, t] : stages) {
        stage_json[name] = {{"entered", t.entered},
                            {"accepted", t.accepted},
                            {"failed", t.failed},
                            {"regenerating", t.regenerating}};
    }
    return {{"input", input},
            {"emitted", emitted},
            {"steps", steps},
            {"stages", stage_json},
            {"failures", failures},
            {"rejected_rewrites", rejected_rewrites},
            {"instruction_degraded", degraded},
            {"augmented", augmented},
            {"llm_calls", llm_calls},
            {"debug_executions", debug_executions}};
}

std::string FunnelReport::to_text() const
{
    std::string out = fmt::format("{:<6}{:<26}{:>10}\n", "Step", "Description", "#Examples");
    out += fmt::format("{:<6}{:<26}{:>10}\n", "", "Input", input);
    for (std::size_t i = 0; i < passing_by_execution.size(); ++i) {
        if (i == 0) {
            out += fmt::format("{:<6}{:<26}{:>10}\n", "1-2", "Sandboxing & Test Gen", passing_by_execution[i]);
        } else {
            out += fmt::format("{:<6}{:<26}{:>10}\n", "3", ordinal(i) + " Exec & Debug Iter", passing_by_execution[i]);
        }
    }
    out += fmt::format("{:<6}{:<26}{:>10}\n", "4", "Post-processing", emitted);
    out += "\n";
    out += fmt::format("{:<14}{:>9}{:>10}{:>8}{:>14}\n", "Stage", "entered", "accepted", "failed", "regenerating");
    for (const auto& [name, t] : stages) {
        out += fmt::format("{:<14}{:>9}{:>10}{:>8}{:>14}\n", name, t.entered, t.accepted, t.failed, t.regenerating);
    }
    out += "\nFailures\n";
    if (failures.empty()) out += "  (none)\n";
    for (const auto& [key, n] : failures) out += fmt::format("  {:<40}{:>6}\n", key, n);
    out += fmt::format("\nRejected debug rewrites: {}\n", rejected_rewrites);
    out += fmt::format("Instruction fallbacks: {}\n", degraded);
    out += fmt::format("Augmented examples: {}\n", augmented);
    out += fmt::format("LLM calls: {}\n", llm_calls);
    out += fmt::format("Debug executions: {}\n", debug_executions);
    return out;
}

}  // namespace codebench::pipeline

#include "codebench/pipeline/stages.hpp"

#include "codebench/python/syntax_tree.hpp"
#include "codebench/python/tokenizer.hpp"
#include "codebench/util/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace codebench::pipeline {

namespace {

std::vector<std::string> sample(const PipelineServices& svc, const StageSampling& s, const std::string& prompt,
                                std::size_t n, const std::string& stage, StageState* state)
{
    if (state) ++state->llm_calls[stage];
    auto req = llm::make_request(s.model, prompt, s.temperature, s.top_p, n);
    return svc.llm.complete(req).samples;
}

bool is_refusal(const llm::LlmError& e)
{
    return e.kind() == llm::LlmError::Kind::refusal;
}

executor::ExecutionReport dependency_failure(const executor::EnvironmentError& e)
{
    executor::ExecutionReport r;
    r.status = executor::ExecStatus::runtime_error;
    r.error = std::string("dependency installation failed: ") + e.what();
    r.stderr_tail = text::tail_lines(e.trace(), 50);
    return r;
}

std::size_t token_count(const std::string& code)
{
    try {
        return python::count_code_tokens(code);
    } catch (const python::SyntaxError&) {
        return 0;
    }
}

struct Rewrite {
    std::optional<Candidate> candidate;
    std::string reason;
};

Rewrite check_rewrite(const std::string& answer, const Candidate& previous, const std::string& function_name,
                      double guard)
{
    auto blocks = llm::extract_code_blocks(answer);
    std::string program = blocks.empty() ? llm::extract_code_block(answer) : blocks[0];
    TestSet tests = previous.tests;
    if (blocks.size() > 1) tests.code = text::with_final_newline(blocks[1]);

    std::optional<SlotSplit> split;
    try {
        split = split_target(program, function_name);
    } catch (const python::SyntaxError&) {
        return {std::nullopt, "unparsable"};
    }
    if (!split) return {std::nullopt, "target_missing"};
    if (!same_code(assemble(split->context, split->target), program)) return {std::nullopt, "target_not_spliceable"};
    auto check = check_test_set(tests.code, function_name);
    if (!check.ok) return {std::nullopt, check.reason};
    double before = double(token_count(previous.program()) + token_count(previous.tests.code));
    double after = double(token_count(program) + token_count(tests.code));
    if (after < guard * before) return {std::nullopt, "rewrite_too_short"};
    return {Candidate{std::move(*split), std::move(tests)}, {}};
}

}  // namespace

void PipelineConfig::set_model(const std::string& model)
{
    for (auto* s : {&sandbox, &tests, &debug, &instruction, &augment}) s->model = model;
}

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::accepted: return "accepted";
    case Outcome::failed: return "failed";
    case Outcome::regenerating: return "regenerating";
    }
    return "unknown";
}

void StageState::record(const std::string& stage, Outcome outcome, const std::string& reason)
{
    history.push_back({stage, outcome, reason});
    if (outcome == Outcome::failed) failure = stage + ":" + reason;
}

std::size_t StageState::attempts(const std::string& stage) const
{
    return std::count_if(history.begin(), history.end(), [&](const StageRecord& r) { return r.stage == stage; });
}

std::string sandbox_fragment(const corpus::SourceFragment& frag, const PipelineServices& svc, const PipelineConfig& cfg)
{
    std::string prompt = svc.templates.render("sandbox", {{"function_name", frag.function_name},
                                                          {"signature", frag.signature},
                                                          {"body", frag.body},
                                                          {"path", frag.path},
                                                          {"repo", frag.repo},
                                                          {"file_context", frag.file_context}});
    return llm::extract_code_block(sample(svc, cfg.sandbox, prompt, 1, "sandbox", nullptr).front());
}

TestSet generate_tests(const std::string& program, const std::string& function_name, const PipelineServices& svc,
                       const PipelineConfig& cfg)
{
    std::string prompt = svc.templates.render("tests", {{"function_name", function_name}, {"program", program}});
    TestSet t;
    t.name = "generated";
    t.origin = TestOrigin::generated;
    t.code = text::with_final_newline(llm::extract_code_block(sample(svc, cfg.tests, prompt, 1, "tests", nullptr).front()));
    return t;
}

executor::AllSetsResult run_test_sets(const std::string& program, const std::vector<std::string>& tests,
                                      const PipelineServices& svc, const PipelineConfig& cfg)
{
    std::shared_ptr<const executor::Environment> env;
    try {
        env = svc.environments.build(derive_dependencies(program));
    } catch (const executor::EnvironmentError& e) {
        executor::AllSetsResult r;
        for (std::size_t i = 0; i < tests.size(); ++i) r.reports.push_back(dependency_failure(e));
        return r;
    }
    auto result = executor::execute_all_sets(svc.executor, program, tests, *env, cfg.timeout);
    if (result.infra) {
        for (const auto& r : result.reports) {
            if (r.status == executor::ExecStatus::infra_error) throw InfrastructureError("executor failure: " + r.error);
        }
    }
    return result;
}

std::string render_report(const executor::ExecutionReport& report)
{
    std::string out = "Status: " + executor::to_string(report.status) + "\n";
    if (auto idx = report.first_failing_assert()) out += fmt::format("First failing assert: #{}\n", *idx);
    if (!report.error.empty()) out += "Error: " + report.error + "\n";
    std::string tail = text::tail_lines(report.stderr_tail, 20);
    if (!text::is_blank(tail)) out += "Stderr (last lines):\n" + text::with_final_newline(tail);
    return out;
}

DebugResult debug_iterate(Candidate candidate, const std::string& function_name, const PipelineServices& svc,
                          const PipelineConfig& cfg, StageState& state)
{
    DebugResult result;
    std::size_t rejections = 0;
    std::string original_target = candidate.split.target;
    for (std::size_t exec = 0;; ++exec) {
        auto run = run_test_sets(candidate.program(), {candidate.tests.code}, svc, cfg);
        ++state.debug_executions;
        result.last_report = run.reports.front();
        if (run.overall) {
            state.record("debug", Outcome::accepted);
            state.passed_at_execution = exec;
            state.target_changed = !same_code(original_target, candidate.split.target);
            result.success = true;
            result.candidate = std::move(candidate);
            return result;
        }
        std::string status = executor::to_string(result.last_report->status);
        if (exec == cfg.debug_iterations) {
            state.record("debug", Outcome::failed, "tests_failing");
            result.reason = "tests_failing";
            result.candidate = std::move(candidate);
            return result;
        }
        std::string prompt = svc.templates.render("debug", {{"function_name", function_name},
                                                            {"program", candidate.program()},
                                                            {"tests", candidate.tests.code},
                                                            {"report", render_report(*result.last_report)}});
        std::optional<Candidate> next;
        while (!next) {
            std::string reason;
            try {
                auto answer = sample(svc, cfg.debug, prompt, 1, "debug", &state).front();
                auto rewrite = check_rewrite(answer, candidate, function_name, cfg.shrink_guard);
                next = std::move(rewrite.candidate);
                reason = rewrite.reason;
            } catch (const llm::LlmError& e) {
                if (!is_refusal(e)) throw;
                reason = "refusal";
            }
            if (next) break;
            ++state.rejected_rewrites;
            if (++rejections > cfg.regeneration_cap) {
                state.record("debug", Outcome::failed, "debug_rewrite_rejected");
                result.reason = "debug_rewrite_rejected";
                result.candidate = std::move(candidate);
                return result;
            }
        }
        state.record("debug", Outcome::regenerating, status);
        candidate = std::move(*next);
    }
}

InstructionResult generate_instruction(const Candidate& candidate, const std::string& function_name,
                                       const std::string& docstring, const PipelineServices& svc,
                                       const PipelineConfig& cfg, StageState& state)
{
    std::string prompt =
        svc.templates.render("instruction", {{"function_name", function_name}, {"program", candidate.program()}});
    for (int attempt = 0; attempt < 2; ++attempt) {
        Instruction ins;
        try {
            ins = parse_instruction(sample(svc, cfg.instruction, prompt, 1, "instruction", &state).front());
        } catch (const llm::LlmError& e) {
            if (!is_refusal(e)) throw;
        }
        if (ins.complete()) {
            state.record("instruction", Outcome::accepted);
            return {std::move(ins), false};
        }
        if (attempt == 0) state.record("instruction", Outcome::regenerating, "incomplete");
    }
    state.record("instruction", Outcome::accepted, "degraded");
    state.degraded = true;
    return {fallback_instruction(docstring, function_name), true};
}

std::optional<TestSet> augment_tests(const Candidate& candidate, const std::string& function_name,
                                     const PipelineServices& svc, const PipelineConfig& cfg, StageState& state)
{
    if (cfg.augment_k == 0) return std::nullopt;
    std::string prompt =
        svc.templates.render("augment", {{"function_name", function_name}, {"program", candidate.program()}});
    std::vector<std::string> answers;
    try {
        answers = sample(svc, cfg.augment, prompt, cfg.augment_k, "augment", &state);
    } catch (const llm::LlmError& e) {
        if (!is_refusal(e)) throw;
    }
    for (const auto& answer : answers) {
        std::string code = text::with_final_newline(llm::extract_code_block(answer));
        if (!check_test_set(code, function_name).ok) continue;
        ++state.augment_executions;
        if (!run_test_sets(candidate.program(), {code}, svc, cfg).overall) continue;
        state.record("augment", Outcome::accepted, "augmented");
        state.augmented = true;
        return TestSet{"augmented", code, TestOrigin::augmented, cfg.augment.model};
    }
    state.record("augment", Outcome::accepted, "not_augmented");
    return std::nullopt;
}

std::optional<std::string> banned_keyword_in(const EvalExample& example, const std::vector<std::string>& banned)
{
    std::string all = example.context + "\n" + example.target;
    for (const auto& t : example.test_sets) all += "\n" + t.code;
    if (auto hit = corpus::first_keyword_hit(all, banned)) return hit->keyword;
    return std::nullopt;
}

FilterResult final_filter(std::vector<EvalExample> examples, const PipelineServices& svc, const PipelineConfig& cfg)
{
    FilterResult result;
    std::vector<EvalExample> survivors;
    for (auto& ex : examples) {
        if (auto kw = banned_keyword_in(ex, cfg.banned_keywords)) {
            result.dropped.emplace_back(ex.id, *kw);
        } else {
            survivors.push_back(std::move(ex));
        }
    }
    std::vector<std::vector<std::string>> lists;
    for (const auto& ex : survivors) lists.push_back(ex.dependencies);
    auto merged = executor::merge_requirements(lists);
    result.merged_dependencies = merged.requirements;
    result.overridden_pins = merged.overridden;
    if (survivors.empty()) return result;

    auto env = svc.environments.build(merged.requirements);

    std::vector<char> ok(survivors.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < survivors.size(); i = next++) {
            try {
                const auto& ex = survivors[i];
                auto run = executor::execute_all_sets(svc.executor, assemble(ex.context, ex.target), ex.test_codes(),
                                                      *env, cfg.timeout);
                if (run.infra) {
                    for (const auto& r : run.reports) {
                        if (r.status == executor::ExecStatus::infra_error)
                            throw InfrastructureError("executor failure: " + r.error);
                    }
                }
                ok[i] = run.overall;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = survivors.size();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < std::min(std::max<std::size_t>(cfg.jobs, 1), survivors.size()); ++t)
            pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        if (ok[i]) {
            result.kept.push_back(std::move(survivors[i]));
        } else {
            result.dropped.emplace_back(survivors[i].id, "shared_env_failure");
        }
    }
    return result;
}

}  // namespace codebench::pipeline

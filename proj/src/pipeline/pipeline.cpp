#include "codebench/pipeline/pipeline.hpp"

#include "codebench/analysis/breakdown.hpp"
#include "codebench/analysis/metrics.hpp"
#include "codebench/analysis/similarity.hpp"
#include "codebench/python/syntax_tree.hpp"
#include "codebench/python/tokenizer.hpp"
#include "codebench/util/text.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace codebench::pipeline {

namespace {

bool is_refusal(const llm::LlmError& e)
{
    return e.kind() == llm::LlmError::Kind::refusal;
}

bool well_formed(const corpus::SourceFragment& frag)
{
    if (frag.function_name.empty()) return false;
    try {
        return python::count_code_tokens(text::dedent(frag.body)) > 0;
    } catch (const python::SyntaxError&) {
        return false;
    }
}

std::set<std::string> variables_of(const std::string& code, const std::string& function_name)
{
    auto tree = python::parse_module(code);
    auto span = analysis::function_span(tree, function_name);
    if (!span) return {};
    return analysis::bound_variables(tree, *span);
}

}  // namespace

std::optional<EvalExample> build_example(const corpus::SourceFragment& frag, const PipelineServices& svc,
                                         const PipelineConfig& cfg, StageState& state)
{
    state.source_id = frag.id;
    if (!well_formed(frag)) {
        state.record("intake", Outcome::failed, "malformed");
        return std::nullopt;
    }
    state.record("intake", Outcome::accepted);

    std::optional<SlotSplit> split;
    for (std::size_t attempt = 0; attempt <= cfg.regeneration_cap; ++attempt) {
        std::string reason;
        try {
            ++state.llm_calls["sandbox"];
            auto verdict = validate_sandbox(sandbox_fragment(frag, svc, cfg), frag, cfg.validation);
            if (verdict.accepted) {
                split = std::move(verdict.split);
                state.record("sandbox", Outcome::accepted);
                break;
            }
            reason = verdict.reason;
        } catch (const llm::LlmError& e) {
            if (!is_refusal(e)) throw;
            reason = "refusal";
        }
        state.record("sandbox", attempt < cfg.regeneration_cap ? Outcome::regenerating : Outcome::failed, reason);
    }
    if (!split) return std::nullopt;

    std::optional<TestSet> tests;
    std::string program = assemble(split->context, split->target);
    for (std::size_t attempt = 0; attempt <= cfg.regeneration_cap; ++attempt) {
        std::string reason;
        try {
            ++state.llm_calls["tests"];
            auto candidate = generate_tests(program, frag.function_name, svc, cfg);
            auto check = check_test_set(candidate.code, frag.function_name);
            if (check.ok) {
                tests = std::move(candidate);
                state.record("tests", Outcome::accepted);
                break;
            }
            reason = check.reason;
        } catch (const llm::LlmError& e) {
            if (!is_refusal(e)) throw;
            reason = "refusal";
        }
        state.record("tests", attempt < cfg.regeneration_cap ? Outcome::regenerating : Outcome::failed, reason);
    }
    if (!tests) return std::nullopt;

    auto debugged = debug_iterate(Candidate{std::move(*split), std::move(*tests)}, frag.function_name, svc, cfg, state);
    if (!debugged.success) return std::nullopt;
    const Candidate& cand = debugged.candidate;

    std::string docstring = function_docstring(cand.split.target);
    if (docstring.empty()) docstring = frag.docstring;
    auto ins = generate_instruction(cand, frag.function_name, docstring, svc, cfg, state);
    auto extra = augment_tests(cand, frag.function_name, svc, cfg, state);

    EvalExample ex;
    ex.id = frag.id;
    ex.context = cand.split.context;
    ex.target = cand.split.target;
    ex.function_header = cand.split.header;
    ex.instruction = std::move(ins.instruction);
    ex.test_sets.push_back(cand.tests);
    if (extra) ex.test_sets.push_back(std::move(*extra));
    ex.dependencies = derive_dependencies(cand.program());
    ex.provenance.source_id = frag.id;
    ex.metadata["qualified_name"] = cand.split.qualified_name;
    ex.metadata["function_name"] = frag.function_name;
    ex.metadata["original_docstring"] = docstring;
    ex.metadata["flags"] = ins.degraded ? json::array({"instruction_degraded"}) : json::array();
    return ex;
}

void annotate(EvalExample& ex, const corpus::SourceFragment& frag, const StageState& state)
{
    std::string program = assemble(ex.context, ex.target);
    auto whole = analysis::compute_metrics(program);
    auto target = analysis::compute_metrics(ex.target, analysis::TextSpan{0, ex.target.size()});
    analysis::ImportClass imports = !whole.external_imports.empty()  ? analysis::ImportClass::external
                                    : !whole.stdlib_imports.empty() ? analysis::ImportClass::standard
                                                                    : analysis::ImportClass::none;
    ex.metadata["debug_iterations"] = state.passed_at_execution.value_or(0);
    ex.metadata["target_changed"] = state.target_changed;
    ex.metadata["repo"] = frag.repo;
    ex.metadata["path"] = frag.path;
    ex.metadata["metrics"] = {{"context_tokens", python::count_code_tokens(ex.context)},
                              {"target_tokens", target.code_tokens},
                              {"ast_depth", target.ast_depth},
                              {"variables", target.variables.size()},
                              {"function_calls", target.function_calls_in_target},
                              {"import_class", std::string(analysis::to_string(imports))},
                              {"import_class_code", static_cast<int>(imports)}};
    double jac = 0.0;
    try {
        auto source = text::dedent(frag.signature) + "\n" + frag.body;
        jac = analysis::jaccard(variables_of(ex.target, frag.function_name), variables_of(source, frag.function_name));
    } catch (const python::SyntaxError&) {
    }
    ex.metadata["realism"] = {{"bleu_vs_source", target_similarity(ex.target, ex.function_header, frag.body)},
                              {"jaccard_vs_source", jac}};
}

PipelineResult run_pipeline(const std::vector<corpus::SourceFragment>& frags, const PipelineConfig& cfg,
                            const PipelineServices& svc)
{
    PipelineResult result;
    result.states.resize(frags.size());
    std::vector<std::optional<EvalExample>> built(frags.size());
    std::vector<char> duplicate(frags.size(), 0);
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < frags.size(); ++i) duplicate[i] = !seen.insert(frags[i].id).second;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < frags.size(); i = next++) {
            try {
                if (duplicate[i]) {
                    result.states[i].source_id = frags[i].id;
                    result.states[i].record("intake", Outcome::failed, "duplicate_id");
                    continue;
                }
                built[i] = build_example(frags[i], svc, cfg, result.states[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = frags.size();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        std::size_t jobs = std::min(std::max<std::size_t>(cfg.jobs, 1), std::max<std::size_t>(frags.size(), 1));
        for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);

    std::vector<EvalExample> candidates;
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < frags.size(); ++i) {
        if (!built[i]) continue;
        index_of[built[i]->id] = i;
        candidates.push_back(std::move(*built[i]));
    }
    result.filter = final_filter(std::move(candidates), svc, cfg);
    for (const auto& [id, reason] : result.filter.dropped) {
        result.states[index_of.at(id)].record("final_filter", Outcome::failed, reason);
    }
    for (auto& ex : result.filter.kept) {
        std::size_t i = index_of.at(ex.id);
        auto& state = result.states[i];
        state.record("final_filter", Outcome::accepted);
        state.emitted = true;
        annotate(ex, frags[i], state);
        for (const auto& r : state.history) ex.provenance.log.push_back({r.stage, to_string(r.outcome), r.reason});
    }
    result.emitted = std::move(result.filter.kept);
    result.filter.kept.clear();
    result.funnel = build_funnel(result.states, cfg.debug_iterations);
    return result;
}

}  // namespace codebench::pipeline

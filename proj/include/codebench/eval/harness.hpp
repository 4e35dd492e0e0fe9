#pragma once

#include "codebench/eval/prompt.hpp"
#include "codebench/executor/executor.hpp"
#include "codebench/llm/gateway.hpp"
#include "codebench/pipeline/example.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace codebench::eval {

struct EvalConfig {
    std::size_t n_samples = 20;
    double temperature = 0.3;
    double top_p = 0.95;
    std::vector<std::size_t> k_list = {1, 2, 5, 10};
    std::size_t max_rounds = 0;
    bool include_tests_in_prompt = false;
    std::chrono::duration<double> timeout = executor::evaluation_timeout;
    std::size_t jobs = 1;
    std::size_t stderr_lines = 20;  // stderr tail shown in refinement prompts

    /// Throws ConfigError when a k exceeds n_samples or a value is out of range.
    void validate() const;
};

/// Source of completions: a model, a scripted fixture, or the ground truth.
class Generator {
public:
    virtual ~Generator() = default;
    [[nodiscard]] virtual std::string model_id() const = 0;
    /// Returns n completions for one prompt. May throw; a throwing call fails every sample.
    virtual std::vector<std::string> generate(const pipeline::EvalExample& example, const std::string& prompt,
                                              std::size_t n, std::size_t round) = 0;
};

class LlmGenerator : public Generator {
public:
    LlmGenerator(llm::Gateway& gateway, std::string model, double temperature, double top_p)
        : gateway_(gateway), model_(std::move(model)), temperature_(temperature), top_p_(top_p)
    {
    }
    [[nodiscard]] std::string model_id() const override { return model_; }
    std::vector<std::string> generate(const pipeline::EvalExample& example, const std::string& prompt, std::size_t n,
                                      std::size_t round) override;

private:
    llm::Gateway& gateway_;
    std::string model_;
    double temperature_;
    double top_p_;
};

/// Returns each example's ground truth.
class OracleGenerator : public Generator {
public:
    [[nodiscard]] std::string model_id() const override { return "oracle"; }
    std::vector<std::string> generate(const pipeline::EvalExample& example, const std::string&, std::size_t n,
                                      std::size_t) override;
};

/// Completions from a callable (example, prompt, round, sample index).
class ScriptedGenerator : public Generator {
public:
    using Script = std::function<std::string(const pipeline::EvalExample&, const std::string&, std::size_t, std::size_t)>;
    ScriptedGenerator(std::string id, Script script) : id_(std::move(id)), script_(std::move(script)) {}
    [[nodiscard]] std::string model_id() const override { return id_; }
    std::vector<std::string> generate(const pipeline::EvalExample& example, const std::string& prompt, std::size_t n,
                                      std::size_t round) override;

private:
    std::string id_;
    Script script_;
};

struct GenerationSample {
    std::string example_id;
    std::string model_id;
    std::size_t round = 0;
    std::size_t sample_index = 0;
    std::string prompt_hash;
    std::string completion;
    std::vector<executor::ExecutionReport> reports;  // one per test set
    bool passed = false;
    std::vector<std::string> tags;  // "refusal", "generator_error"
    std::string prompt;             // kept in memory for hygiene scans, not serialized

    [[nodiscard]] bool has_tag(const std::string& t) const;
};

json to_json(const GenerationSample& s);
GenerationSample sample_from_json(const json& j);

struct ExampleScore {
    std::string example_id;
    std::size_t n = 0;
    std::size_t c = 0;
    std::map<std::size_t, double> pass_at_k;
};

struct PassReport {
    std::string model_id;
    std::size_t n_samples = 0;
    std::vector<std::size_t> k_list;
    std::map<std::size_t, double> pass_at_k;  // dataset mean
    std::vector<ExampleScore> examples;
    std::size_t refusals = 0;

    [[nodiscard]] json to_json() const;
};

/// Table with one row per report: Model, Pass@k columns in percent.
std::string render_pass_table(const std::vector<PassReport>& reports);

/// True when the completion has no fenced code and no `def <name>` header.
bool is_refusal(const std::string& completion, const std::string& function_name);

/// Splices a completion into the example and runs every test set. Infrastructure errors are
/// retried once, then thrown as InfrastructureError.
GenerationSample score_completion(const pipeline::EvalExample& example, const std::string& completion,
                                  executor::Executor& executor, const executor::Environment& env,
                                  const EvalConfig& cfg);

/// Samples n completions per example and scores them. Samples are appended to `samples`
/// (when given) in (example, sample index) order.
PassReport evaluate(const std::vector<pipeline::EvalExample>& dataset, Generator& generator,
                    executor::Executor& executor, const executor::Environment& env, const EvalConfig& cfg,
                    std::vector<GenerationSample>* samples = nullptr);

/// Execution results as shown to a generator (or study participant) after a failed attempt,
/// with test fragments withheld.
std::string render_feedback(const std::vector<executor::ExecutionReport>& reports, const TestLeakGuard& guard,
                            std::size_t stderr_lines = 20);

/// Prompt for round r+1 from the round-r prompt, completion and reports.
std::string next_round_prompt(const std::string& prompt, const std::string& completion, const std::string& feedback);

/// Iterative refinement: one sample per round, stops at the first pass or after max_rounds
/// revisions. Returns the trajectory.
std::vector<GenerationSample> refine_loop(const pipeline::EvalExample& example, Generator& generator,
                                          executor::Executor& executor, const executor::Environment& env,
                                          const EvalConfig& cfg);

/// Runs refine_loop over every example on cfg.jobs workers; trajectories in dataset order.
std::vector<std::vector<GenerationSample>> refine_all(const std::vector<pipeline::EvalExample>& dataset,
                                                      Generator& generator, executor::Executor& executor,
                                                      const executor::Environment& env, const EvalConfig& cfg);

/// Round of the first passing sample, if any.
std::optional<std::size_t> solved_round(const std::vector<GenerationSample>& trajectory);

/// Cumulative fraction of trajectories solved by each round, rounds 0..rounds-1 (default: the
/// longest trajectory). Throws std::invalid_argument("no data") when empty.
std::vector<double> accuracy_by_round(const std::vector<std::vector<GenerationSample>>& trajectories,
                                      std::optional<std::size_t> rounds = std::nullopt);
std::vector<double> accuracy_by_round(const std::vector<std::optional<std::size_t>>& solved_rounds, std::size_t rounds);

}  // namespace codebench::eval

#include "codebench/eval/harness.hpp"

#include "codebench/analysis/pass_at_k.hpp"
#include "codebench/pipeline/slots.hpp"
#include "codebench/util/errors.hpp"
#include "codebench/util/hash.hpp"
#include "codebench/util/text.hpp"

#include <fmt/format.h>

#include <atomic>
#include <exception>
#include <mutex>
#include <regex>
#include <thread>

namespace codebench::eval {

namespace {

// Runs task(i) for i in [0, count) on `jobs` threads; the first exception stops the pool and
// is rethrown.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task)
{
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(count, 1));
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);
}

bool fatal(const llm::LlmError& e)
{
    using K = llm::LlmError::Kind;
    return e.kind() == K::auth || e.kind() == K::config || e.kind() == K::fixture_miss;
}

struct Generated {
    std::vector<std::string> completions;
    std::string tag;  // set when the generator failed
    std::string error;
};

Generated call_generator(Generator& gen, const pipeline::EvalExample& ex, const std::string& prompt, std::size_t n,
                         std::size_t round)
{
    Generated g;
    try {
        g.completions = gen.generate(ex, prompt, n, round);
    } catch (const llm::LlmError& e) {
        if (fatal(e)) throw;
        g.tag = e.kind() == llm::LlmError::Kind::refusal ? "refusal" : "generator_error";
        g.error = e.what();
    }
    g.completions.resize(n);
    return g;
}

std::string prompt_for(const pipeline::EvalExample& ex, const EvalConfig& cfg)
{
    std::string prompt = build_prompt(ex);
    if (cfg.include_tests_in_prompt) {
        for (const auto& t : ex.test_sets) prompt += "\nTests:\n```python\n" + text::with_final_newline(t.code) + "```\n";
    }
    return prompt;
}

}  // namespace

void EvalConfig::validate() const
{
    if (n_samples == 0) throw ConfigError("n_samples must be at least 1");
    if (k_list.empty()) throw ConfigError("k_list is empty");
    for (auto k : k_list) {
        if (k == 0 || k > n_samples)
            throw ConfigError(fmt::format("k={} is outside 1..n_samples ({})", k, n_samples));
    }
    if (temperature < 0.0 || temperature > 2.0) throw ConfigError("temperature must be in [0, 2]");
    if (top_p <= 0.0 || top_p > 1.0) throw ConfigError("top_p must be in (0, 1]");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
}

std::vector<std::string> LlmGenerator::generate(const pipeline::EvalExample&, const std::string& prompt, std::size_t n,
                                                std::size_t)
{
    return gateway_.complete(llm::make_request(model_, prompt, temperature_, top_p_, n)).samples;
}

std::vector<std::string> OracleGenerator::generate(const pipeline::EvalExample& example, const std::string&,
                                                   std::size_t n, std::size_t)
{
    return std::vector<std::string>(n, example.target);
}

std::vector<std::string> ScriptedGenerator::generate(const pipeline::EvalExample& example, const std::string& prompt,
                                                     std::size_t n, std::size_t round)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(script_(example, prompt, round, i));
    return out;
}

bool GenerationSample::has_tag(const std::string& t) const
{
    return std::find(tags.begin(), tags.end(), t) != tags.end();
}

json to_json(const GenerationSample& s)
{
    json reports = json::array();
    for (const auto& r : s.reports) reports.push_back(executor::to_json(r));
    return {{"example_id", s.example_id}, {"model_id", s.model_id}, {"round", s.round},
            {"sample_index", s.sample_index}, {"prompt_hash", s.prompt_hash}, {"completion", s.completion},
            {"reports", reports}, {"verdict", s.passed ? "pass" : "fail"}, {"tags", s.tags}};
}

GenerationSample sample_from_json(const json& j)
{
    GenerationSample s;
    s.example_id = j.at("example_id").get<std::string>();
    s.model_id = j.at("model_id").get<std::string>();
    s.round = j.at("round").get<std::size_t>();
    s.sample_index = j.value("sample_index", std::size_t{0});
    s.prompt_hash = j.at("prompt_hash").get<std::string>();
    s.completion = j.at("completion").get<std::string>();
    for (const auto& r : j.at("reports")) s.reports.push_back(executor::report_from_json(r));
    std::string verdict = j.at("verdict").get<std::string>();
    if (verdict != "pass" && verdict != "fail") throw std::invalid_argument("verdict must be pass or fail");
    s.passed = verdict == "pass";
    s.tags = j.value("tags", std::vector<std::string>{});
    bool all = !s.reports.empty();
    for (const auto& r : s.reports) all = all && r.passed();
    if (all != s.passed) throw std::invalid_argument("verdict disagrees with reports");
    return s;
}

json PassReport::to_json() const
{
    json per = json::array();
    for (const auto& e : examples) {
        json pk = json::object();
        for (const auto& [k, v] : e.pass_at_k) pk[std::to_string(k)] = v;
        per.push_back({{"example_id", e.example_id}, {"n", e.n}, {"c", e.c}, {"pass_at_k", pk}});
    }
    json pk = json::object();
    for (const auto& [k, v] : pass_at_k) pk[std::to_string(k)] = v;
    return {{"model_id", model_id}, {"n_samples", n_samples}, {"k_list", k_list},
            {"pass_at_k", pk},      {"refusals", refusals},   {"examples", per}};
}

std::string render_pass_table(const std::vector<PassReport>& reports)
{
    std::vector<std::size_t> ks;
    for (const auto& r : reports) {
        for (auto k : r.k_list) {
            if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
        }
    }
    std::sort(ks.begin(), ks.end());
    std::string out = fmt::format("{:<24}", "Model");
    for (auto k : ks) out += fmt::format("{:>10}", fmt::format("Pass@{}", k));
    out += "\n";
    for (const auto& r : reports) {
        out += fmt::format("{:<24}", r.model_id);
        for (auto k : ks) {
            auto it = r.pass_at_k.find(k);
            out += it == r.pass_at_k.end() ? fmt::format("{:>10}", "-") : fmt::format("{:>10.2f}", 100.0 * it->second);
        }
        out += "\n";
    }
    return out;
}

bool is_refusal(const std::string& completion, const std::string& function_name)
{
    if (!llm::extract_code_blocks(completion).empty()) return false;
    std::regex header("def\\s+" + function_name + "\\s*\\(");
    return !std::regex_search(completion, header);
}

GenerationSample score_completion(const pipeline::EvalExample& ex, const std::string& completion,
                                  executor::Executor& executor, const executor::Environment& env,
                                  const EvalConfig& cfg)
{
    GenerationSample s;
    s.example_id = ex.id;
    s.completion = completion;
    std::string fn = ex.function_name();
    if (is_refusal(completion, fn)) {
        s.tags.push_back("refusal");
        return s;
    }
    std::string def = pipeline::normalize_completion(llm::extract_code_block(completion), fn, ex.function_header);
    std::string program = pipeline::assemble(ex.context, def);
    for (int attempt = 0;; ++attempt) {
        auto run = executor::execute_all_sets(executor, program, ex.test_codes(), env, cfg.timeout);
        if (!run.infra) {
            s.reports = std::move(run.reports);
            s.passed = run.overall;
            break;
        }
        if (attempt == 1) {
            std::string why;
            for (const auto& r : run.reports) {
                if (r.status == executor::ExecStatus::infra_error) why = r.error;
            }
            throw InfrastructureError("evaluation of " + ex.id + " failed twice: " + why);
        }
    }
    return s;
}

PassReport evaluate(const std::vector<pipeline::EvalExample>& dataset, Generator& generator,
                    executor::Executor& executor, const executor::Environment& env, const EvalConfig& cfg,
                    std::vector<GenerationSample>* samples)
{
    cfg.validate();
    const std::size_t n = cfg.n_samples;
    std::vector<std::string> prompts(dataset.size());
    std::vector<Generated> generated(dataset.size());
    parallel_for(dataset.size(), cfg.jobs, [&](std::size_t i) {
        prompts[i] = prompt_for(dataset[i], cfg);
        generated[i] = call_generator(generator, dataset[i], prompts[i], n, 0);
    });

    std::vector<GenerationSample> scored(dataset.size() * n);
    parallel_for(scored.size(), cfg.jobs, [&](std::size_t t) {
        std::size_t i = t / n, j = t % n;
        const auto& g = generated[i];
        GenerationSample s;
        if (!g.tag.empty()) {
            s.example_id = dataset[i].id;
            s.completion = "";
            s.tags = {g.tag};
        } else {
            s = score_completion(dataset[i], g.completions[j], executor, env, cfg);
        }
        s.model_id = generator.model_id();
        s.sample_index = j;
        s.prompt_hash = sha256_hex(prompts[i]);
        s.prompt = prompts[i];
        scored[t] = std::move(s);
    });

    PassReport report;
    report.model_id = generator.model_id();
    report.n_samples = n;
    report.k_list = cfg.k_list;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        ExampleScore e;
        e.example_id = dataset[i].id;
        e.n = n;
        for (std::size_t j = 0; j < n; ++j) {
            const auto& s = scored[i * n + j];
            e.c += s.passed;
            report.refusals += s.has_tag("refusal");
        }
        for (auto k : cfg.k_list) e.pass_at_k[k] = analysis::pass_at_k(n, e.c, k);
        report.examples.push_back(std::move(e));
    }
    for (auto k : cfg.k_list) {
        double sum = 0.0;
        for (const auto& e : report.examples) sum += e.pass_at_k.at(k);
        report.pass_at_k[k] = report.examples.empty() ? 0.0 : sum / double(report.examples.size());
    }
    if (samples) std::move(scored.begin(), scored.end(), std::back_inserter(*samples));
    return report;
}

std::string render_feedback(const std::vector<executor::ExecutionReport>& reports, const TestLeakGuard& guard,
                            std::size_t stderr_lines)
{
    std::string out;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        out += fmt::format("Test set {}: {}\n", i + 1, executor::to_string(r.status));
        if (auto idx = r.first_failing_assert()) out += fmt::format("First failing assert: #{}\n", *idx);
        if (!r.error.empty()) out += "Error: " + r.error + "\n";
        std::string tail = text::tail_lines(r.stderr_tail, stderr_lines);
        if (!text::is_blank(tail)) out += "Stderr:\n" + text::with_final_newline(tail);
    }
    return guard.redact(out);
}

std::string next_round_prompt(const std::string& prompt, const std::string& completion, const std::string& feedback)
{
    return text::with_final_newline(prompt) + "\n" + text::with_final_newline(completion) + "\nExecution results:\n" +
           text::with_final_newline(feedback);
}

std::vector<GenerationSample> refine_loop(const pipeline::EvalExample& ex, Generator& generator,
                                          executor::Executor& executor, const executor::Environment& env,
                                          const EvalConfig& cfg)
{
    std::vector<GenerationSample> trajectory;
    TestLeakGuard guard(ex);
    std::string prompt = prompt_for(ex, cfg);
    for (std::size_t round = 0;; ++round) {
        auto g = call_generator(generator, ex, prompt, 1, round);
        GenerationSample s;
        if (!g.tag.empty()) {
            s.example_id = ex.id;
            s.tags = {g.tag};
        } else {
            s = score_completion(ex, g.completions.front(), executor, env, cfg);
        }
        s.model_id = generator.model_id();
        s.round = round;
        s.prompt_hash = sha256_hex(prompt);
        s.prompt = prompt;
        trajectory.push_back(s);
        if (s.passed || round >= cfg.max_rounds) break;
        std::string feedback = s.reports.empty() ? std::string("No code was found in the response.\n")
                                                 : render_feedback(s.reports, guard, cfg.stderr_lines);
        prompt = next_round_prompt(prompt, s.completion, feedback);
    }
    return trajectory;
}

std::vector<std::vector<GenerationSample>> refine_all(const std::vector<pipeline::EvalExample>& dataset,
                                                      Generator& generator, executor::Executor& executor,
                                                      const executor::Environment& env, const EvalConfig& cfg)
{
    std::vector<std::vector<GenerationSample>> out(dataset.size());
    parallel_for(dataset.size(), cfg.jobs,
                 [&](std::size_t i) { out[i] = refine_loop(dataset[i], generator, executor, env, cfg); });
    return out;
}

std::optional<std::size_t> solved_round(const std::vector<GenerationSample>& trajectory)
{
    for (const auto& s : trajectory) {
        if (s.passed) return s.round;
    }
    return std::nullopt;
}

std::vector<double> accuracy_by_round(const std::vector<std::optional<std::size_t>>& solved, std::size_t rounds)
{
    if (solved.empty()) throw std::invalid_argument("no data");
    std::vector<double> acc(rounds, 0.0);
    for (std::size_t r = 0; r < rounds; ++r) {
        std::size_t hits = 0;
        for (const auto& s : solved) hits += s && *s <= r;
        acc[r] = double(hits) / double(solved.size());
    }
    return acc;
}

std::vector<double> accuracy_by_round(const std::vector<std::vector<GenerationSample>>& trajectories,
                                      std::optional<std::size_t> rounds)
{
    if (trajectories.empty()) throw std::invalid_argument("no data");
    std::vector<std::optional<std::size_t>> solved;
    std::size_t longest = 0;
    for (const auto& t : trajectories) {
        solved.push_back(solved_round(t));
        for (const auto& s : t) longest = std::max(longest, s.round + 1);
    }
    return accuracy_by_round(solved, rounds.value_or(longest));
}

}  // namespace codebench::eval

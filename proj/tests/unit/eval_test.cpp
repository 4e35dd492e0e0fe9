#include "codebench/analysis/pass_at_k.hpp"
#include "codebench/eval/harness.hpp"
#include "codebench/pipeline/slots.hpp"
#include "codebench/util/errors.hpp"
#include "support/fake_installer.hpp"
#include "support/sample_examples.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

using namespace codebench;
using namespace codebench::eval;
using codebench::pipeline::EvalExample;
using codebench::testing::TempDir;
using namespace codebench::testing::samples;

namespace {

class Harness : public ::testing::Test {
protected:
    Harness()
        : envs_(dir_.path() / "envs", std::make_shared<codebench::testing::FakeInstaller>()),
          executor_(executor::ExecutorConfig{codebench::testing::mini_shim_command(), dir_.path() / "scratch"}),
          env_(envs_.build({}))
    {
        cfg_.timeout = std::chrono::seconds(10);
    }

    TempDir dir_;
    executor::EnvironmentManager envs_;
    executor::Executor executor_;
    std::shared_ptr<const executor::Environment> env_;
    EvalConfig cfg_;
};

class FlakyExecutor : public executor::Executor {
public:
    FlakyExecutor(executor::ExecutorConfig cfg, int failures) : Executor(std::move(cfg)), failures_(failures) {}
    executor::ExecutionReport execute(const executor::ExecutionJob& job, const executor::Environment& env) override
    {
        ++calls;
        if (failures_-- > 0) {
            executor::ExecutionReport r;
            r.status = executor::ExecStatus::infra_error;
            r.error = "shim crashed";
            return r;
        }
        return Executor::execute(job, env);
    }
    int calls = 0;

private:
    int failures_;
};

}  // namespace

TEST(Prompt, MatchesAppendixLayout)
{
    std::string program = "from __future__ import print_function\nimport os\nimport sys\n\n"
                          "class CkClass ( object ) :\n    flags_dict = dict ( )\n    fields = dict ( )\n    flags = 0\n\n"
                          "    def flags2text ( self ) :\n        return [ ]\n";
    auto ex = make_example("ck", program, "flags2text", {"assert 1\n"});
    ex.instruction = {"Converts the 'self.flags' field into a list of strings representing set flag bits.",
                      "No external inputs; uses class instance's 'self.flags' and 'self.flags_dict'.",
                      "List of strings corresponding to set flags."};
    std::string expected =
        "Complete the CkClass.flags2text function in the code below based on the docstring.\n"
        "Output one complete piece of code. Your code should start with a ```python delimiter and end with a ``` "
        "delimiter.\n"
        "\n"
        "```python\n"
        "from __future__ import print_function\n"
        "import os\n"
        "import sys\n"
        "\n"
        "class CkClass ( object ) :\n"
        "    flags_dict = dict ( )\n"
        "    fields = dict ( )\n"
        "    flags = 0\n"
        "\n"
        "    def flags2text ( self ) :\n"
        "        \"\"\"\n"
        "        Functionality: Converts the 'self.flags' field into a list of strings representing set flag bits.\n"
        "        Inputs: No external inputs; uses class instance's 'self.flags' and 'self.flags_dict'.\n"
        "        Outputs: List of strings corresponding to set flags.\n"
        "        \"\"\"\n"
        "\n"
        "        ...\n"
        "```\n";
    EXPECT_EQ(build_prompt(ex), expected);
}

TEST(Prompt, DegradedExampleUsesOriginalDocstring)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    ex.metadata["flags"] = json::array({"instruction_degraded"});
    ex.metadata["original_docstring"] = "Clamp value into range.\n\nLong form.";
    auto p = build_prompt(ex);
    EXPECT_NE(p.find("    \"\"\"\n    Clamp value into range.\n\n    Long form.\n    \"\"\"\n\n    ...\n"), std::string::npos);
    EXPECT_EQ(p.find("Functionality:"), std::string::npos);
    EXPECT_NE(p.find("def scale(values, factor):"), std::string::npos);
}

TEST(Prompt, ExcludesTestsAndTarget)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests, clamp_extra});
    auto p = build_prompt(ex);
    EXPECT_EQ(p.find("assert"), std::string::npos);
    EXPECT_EQ(p.find("return high"), std::string::npos);
    EXPECT_EQ(p.find("<codebench:target>"), std::string::npos);
}

TEST(LeakGuard, FlagsAndRedactsTestFragments)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    TestLeakGuard guard(ex);
    EXPECT_FALSE(guard.leaks(build_prompt(ex)));
    std::string stderr_text = "Error at line 4\n    assert clamp(11, 0, 10) == 10\nAssertionError\n";
    EXPECT_TRUE(guard.leaks(stderr_text));
    EXPECT_EQ(guard.redact(stderr_text), "Error at line 4\n    [line withheld]\nAssertionError\n");
    // Twenty spaces and fragments shared with the prompt are not secrets.
    TestLeakGuard g2({"                    x = 1\nprint('shared-public-text')\n"}, "print('shared-public-text')", 20);
    EXPECT_FALSE(g2.leaks("                         "));
    EXPECT_FALSE(g2.leaks("print('shared-public-text')"));
    EXPECT_TRUE(g2.leaks("                x = 1\nprint('"));
}

TEST(EvalConfigTest, Validation)
{
    EvalConfig c;
    EXPECT_NO_THROW(c.validate());
    c.n_samples = 4;
    EXPECT_THROW(c.validate(), ConfigError);
    c.k_list = {1, 2, 4};
    EXPECT_NO_THROW(c.validate());
    c.top_p = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_FALSE(EvalConfig{}.include_tests_in_prompt);
    EXPECT_EQ(EvalConfig{}.n_samples, 20u);
}

TEST_F(Harness, OracleScoresOneForAllK)
{
    std::vector<EvalExample> ds = {make_example("c", clamp_program, "clamp", {clamp_tests, clamp_extra}),
                                   make_example("n", net_program, "forward", {net_tests})};
    cfg_.n_samples = 10;
    OracleGenerator oracle;
    std::vector<GenerationSample> samples;
    auto r = evaluate(ds, oracle, executor_, *env_, cfg_, &samples);
    for (auto k : {1, 2, 5, 10}) EXPECT_EQ(r.pass_at_k.at(k), 1.0);
    EXPECT_EQ(samples.size(), 20u);
    EXPECT_EQ(samples[0].reports.size(), 2u);
    EXPECT_EQ(r.refusals, 0u);
}

TEST_F(Harness, EmptyCompletionsScoreZeroAsRefusals)
{
    std::vector<EvalExample> ds = {make_example("c", clamp_program, "clamp", {clamp_tests})};
    cfg_.n_samples = 2;
    cfg_.k_list = {1, 2};
    ScriptedGenerator empty("empty", [](auto&, auto&, auto, auto) { return std::string{}; });
    std::vector<GenerationSample> samples;
    auto r = evaluate(ds, empty, executor_, *env_, cfg_, &samples);
    EXPECT_EQ(r.pass_at_k.at(1), 0.0);
    EXPECT_EQ(r.pass_at_k.at(2), 0.0);
    EXPECT_EQ(r.refusals, 2u);
    EXPECT_TRUE(samples[0].has_tag("refusal"));
    EXPECT_TRUE(samples[0].reports.empty());
}

TEST_F(Harness, HalfCorrectGivesFiveSixths)
{
    std::vector<EvalExample> ds = {make_example("c", clamp_program, "clamp", {clamp_tests})};
    cfg_.n_samples = 4;
    cfg_.k_list = {2};
    ScriptedGenerator half("half", [](const EvalExample& ex, auto&, auto, std::size_t i) {
        return i % 2 == 0 ? "```python\n" + ex.target + "```" : std::string("```python\nreturn value\n```");
    });
    auto r = evaluate(ds, half, executor_, *env_, cfg_);
    EXPECT_EQ(r.examples[0].c, 2u);
    // 1 - C(2,2)/C(4,2)
    EXPECT_DOUBLE_EQ(r.pass_at_k.at(2), 1.0 - 1.0 / 6.0);
}

TEST_F(Harness, BodyOnlyAndWholeModuleCompletions)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    auto body = score_completion(ex, "```python\nreturn max(low, min(value, high))\n```", executor_, *env_, cfg_);
    EXPECT_TRUE(body.passed);
    auto whole = score_completion(ex, "Sure:\n```python\n" + clamp_program + "```\n", executor_, *env_, cfg_);
    EXPECT_TRUE(whole.passed);
    auto prose = score_completion(ex, "I cannot help with that.", executor_, *env_, cfg_);
    EXPECT_TRUE(prose.has_tag("refusal"));
    EXPECT_FALSE(prose.passed);
}

TEST_F(Harness, GeneratorErrorsFailSamplesButConfigErrorsAbort)
{
    std::vector<EvalExample> ds = {make_example("c", clamp_program, "clamp", {clamp_tests})};
    cfg_.n_samples = 2;
    cfg_.k_list = {1};
    ScriptedGenerator flaky("flaky", [](auto&, auto&, auto, auto) -> std::string {
        throw llm::LlmError(llm::LlmError::Kind::server, "giving up");
    });
    std::vector<GenerationSample> samples;
    auto r = evaluate(ds, flaky, executor_, *env_, cfg_, &samples);
    EXPECT_EQ(r.pass_at_k.at(1), 0.0);
    EXPECT_TRUE(samples[0].has_tag("generator_error"));
    ScriptedGenerator denied("denied", [](auto&, auto&, auto, auto) -> std::string {
        throw llm::LlmError(llm::LlmError::Kind::auth, "no key");
    });
    EXPECT_THROW(evaluate(ds, denied, executor_, *env_, cfg_), llm::LlmError);
}

TEST_F(Harness, InfraErrorsRequeueOnceThenAbort)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    executor::ExecutorConfig ec{codebench::testing::mini_shim_command(), dir_.path() / "scratch"};
    FlakyExecutor once(ec, 1);
    EXPECT_TRUE(score_completion(ex, ex.target, once, *env_, cfg_).passed);
    EXPECT_EQ(once.calls, 2);
    FlakyExecutor twice(ec, 2);
    EXPECT_THROW(score_completion(ex, ex.target, twice, *env_, cfg_), InfrastructureError);
}

TEST_F(Harness, RefineRepeatingWrongAnswer)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    cfg_.max_rounds = 3;
    ScriptedGenerator stubborn("stubborn", [](auto&, auto&, auto, auto) {
        return std::string("```python\ndef clamp(value, low, high):\n    return value\n```");
    });
    auto t = refine_loop(ex, stubborn, executor_, *env_, cfg_);
    ASSERT_EQ(t.size(), 4u);
    for (std::size_t r = 0; r < t.size(); ++r) {
        EXPECT_EQ(t[r].round, r);
        EXPECT_EQ(t[r].completion, t[0].completion);
        EXPECT_FALSE(t[r].passed);
        if (r > 0) {
            EXPECT_EQ(t[r].prompt.rfind(t[r - 1].prompt, 0), 0u);
            EXPECT_NE(t[r].prompt.find("Test set 1: failed_assert"), std::string::npos);
            EXPECT_NE(t[r].prompt.find("First failing assert: #2"), std::string::npos);
        }
    }
    EXPECT_FALSE(solved_round(t));
}

TEST_F(Harness, RefineFixesAfterMissingArgumentError)
{
    auto ex = make_example("n", net_program, "forward", {net_tests});
    cfg_.max_rounds = 4;
    ScriptedGenerator learner("learner", [](const EvalExample& e, const std::string& prompt, std::size_t, std::size_t) {
        if (prompt.find("missing 1 required positional argument") != std::string::npos) {
            return "```python\n" + e.target + "```";
        }
        return std::string("```python\ndef forward(self, x):\n    return sum(feed_forward(x))\n```");
    });
    auto t = refine_loop(ex, learner, executor_, *env_, cfg_);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0].reports[0].status, executor::ExecStatus::runtime_error);
    EXPECT_TRUE(t[1].passed);
    EXPECT_EQ(solved_round(t), 1u);
    TestLeakGuard guard(ex);
    for (const auto& s : t) EXPECT_FALSE(guard.leaks(s.prompt));
}

TEST_F(Harness, ZeroRoundsIsOneSample)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    cfg_.max_rounds = 0;
    ScriptedGenerator wrong("w", [](auto&, auto&, auto, auto) { return std::string("```python\nreturn 0\n```"); });
    auto t = refine_loop(ex, wrong, executor_, *env_, cfg_);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].prompt, build_prompt(ex));
}

TEST_F(Harness, AccuracyByRoundStartsAtPassAtOne)
{
    std::vector<EvalExample> ds = {make_example("c", clamp_program, "clamp", {clamp_tests}),
                                   make_example("n", net_program, "forward", {net_tests})};
    cfg_.max_rounds = 2;
    ScriptedGenerator g("g", [](const EvalExample& e, const std::string&, std::size_t round, std::size_t) {
        if (e.id == "c" || round == 2) return "```python\n" + e.target + "```";
        return std::string("```python\nreturn None\n```");
    });
    auto trajectories = refine_all(ds, g, executor_, *env_, cfg_);
    auto acc = accuracy_by_round(trajectories, 3);
    EXPECT_EQ(acc, (std::vector<double>{0.5, 0.5, 1.0}));
    double pass1 = 0.0;
    for (const auto& t : trajectories) pass1 += analysis::pass_at_k(1, t[0].passed ? 1 : 0, 1);
    EXPECT_EQ(acc[0], pass1 / double(trajectories.size()));
}

TEST(AccuracyByRound, HandCountedFixture)
{
    std::vector<std::optional<std::size_t>> solved = {0, 1, 1, 3};
    EXPECT_EQ(accuracy_by_round(solved, 4), (std::vector<double>{0.25, 0.75, 0.75, 1.0}));
    EXPECT_EQ(accuracy_by_round(std::vector<std::optional<std::size_t>>{0, 0}, 3), (std::vector<double>{1, 1, 1}));
    try {
        accuracy_by_round(std::vector<std::vector<GenerationSample>>{});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_STREQ(e.what(), "no data");
    }
}

TEST(AccuracyByRound, MonotoneOnRandomFixtures)
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::optional<std::size_t>> solved;
        for (int i = 0; i < 1 + trial % 9; ++i) {
            int r = int(rng() % 6);
            solved.push_back(r == 5 ? std::nullopt : std::optional<std::size_t>(r));
        }
        auto acc = accuracy_by_round(solved, 5);
        for (std::size_t r = 1; r < acc.size(); ++r) EXPECT_GE(acc[r], acc[r - 1]);
    }
}

TEST(Feedback, RedactsLeakingLinesOnly)
{
    auto ex = make_example("c", clamp_program, "clamp", {clamp_tests});
    executor::ExecutionReport rep;
    rep.status = executor::ExecStatus::failed_assert;
    rep.per_assert = {{1, true}, {2, false}};
    rep.error = "assert 2 failed";
    rep.stderr_tail = "line 1\n    assert clamp(-1, 0, 10) == 0\nAssertionError\n";
    auto text = render_feedback({rep}, TestLeakGuard(ex));
    EXPECT_NE(text.find("First failing assert: #2"), std::string::npos);
    EXPECT_EQ(text.find("clamp(-1, 0, 10)"), std::string::npos);
    EXPECT_NE(text.find("[line withheld]"), std::string::npos);
    EXPECT_NE(text.find("AssertionError"), std::string::npos);
}

TEST(Samples, JsonRoundTripAndConsistency)
{
    GenerationSample s;
    s.example_id = "e";
    s.model_id = "m";
    s.round = 1;
    s.prompt_hash = "h";
    s.completion = "x";
    executor::ExecutionReport ok;
    ok.status = executor::ExecStatus::passed;
    s.reports = {ok};
    s.passed = true;
    auto back = sample_from_json(to_json(s));
    EXPECT_EQ(back.round, 1u);
    EXPECT_TRUE(back.passed);
    auto j = to_json(s);
    j["verdict"] = "fail";
    EXPECT_THROW(sample_from_json(j), std::invalid_argument);
}

TEST(Report, TableShape)
{
    PassReport a;
    a.model_id = "gpt";
    a.k_list = {1, 2};
    a.pass_at_k = {{1, 0.375}, {2, 0.5}};
    auto t = render_pass_table({a});
    EXPECT_NE(t.find("Pass@1"), std::string::npos);
    EXPECT_NE(t.find("37.50"), std::string::npos);
}

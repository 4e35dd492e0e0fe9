#include "codebench/cli/app.hpp"
#include "codebench/cli/config.hpp"
#include "codebench/study/http.hpp"
#include "codebench/util/errors.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <cstdlib>
#include <sstream>

using namespace codebench;
using codebench::testing::fixture_dir;
using codebench::testing::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run codebench_cli(std::vector<std::string> args, const cli::Hooks& hooks = {})
{
    std::ostringstream out, err;
    int code = cli::run(args, out, err, hooks);
    return {code, out.str(), err.str()};
}

std::filesystem::path replay_dir()
{
    return fixture_dir() / "replay";
}

std::string replay_config()
{
    return (replay_dir() / "config.json").string();
}

// Generates the replay dataset into dir and returns the run.
Run generate_replay(const std::filesystem::path& dir, std::vector<std::string> extra = {})
{
    std::vector<std::string> args = {"generate", "-c", replay_config(), "--fragments",
                                     (replay_dir() / "corpus.jsonl").string(), "-o", dir.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return codebench_cli(args);
}

}  // namespace

TEST(CliConfig, ParsesAndResolvesPaths)
{
    auto c = cli::load_run_config(replay_dir() / "config.json");
    EXPECT_EQ(c.replay_mode, llm::ReplayMode::replay_strict);
    EXPECT_EQ(*c.transcript, replay_dir() / "transcript.jsonl");
    EXPECT_EQ(c.model_for("augment"), "scripted");
    ASSERT_EQ(c.shim_command.size(), 2u);
    EXPECT_TRUE(std::filesystem::exists(c.shim_command[1]));
    EXPECT_EQ(c.regenerations, 3u);
    EXPECT_EQ(c.debug_iterations, 3u);
    EXPECT_EQ(c.augment_k, 5u);
}

TEST(CliConfig, RejectsBadDocuments)
{
    EXPECT_THROW(cli::config_from_json({{"colour", 1}}, "."), ConfigError);
    EXPECT_THROW(cli::config_from_json({{"caps", {{"regenerations", "three"}}}}, "."), ConfigError);
    EXPECT_THROW(cli::config_from_json({{"caps", {{"regenerations", -1}}}}, "."), ConfigError);
    EXPECT_THROW(cli::config_from_json({{"replay", {{"mode", "sometimes"}}}}, "."), ConfigError);
    EXPECT_THROW(cli::config_from_json({{"providers", {{"x", {{"model", "m"}}}}}}, "."), ConfigError);
    auto c = cli::config_from_json({{"jobs", 0}}, ".");
    EXPECT_THROW(c.validate(), ConfigError);
    auto d = cli::config_from_json({{"sampling", {{"planning", {{"temperature", 0.1}}}}}}, ".");
    EXPECT_THROW(d.validate(), ConfigError);
    EXPECT_THROW(cli::config_from_json(json::object(), ".").model_for("sandbox"), ConfigError);
}

TEST(Cli, UsageAndConfigErrorsExitTwo)
{
    EXPECT_EQ(codebench_cli({}).code, cli::exit_config);
    EXPECT_EQ(codebench_cli({"frobnicate"}).code, cli::exit_config);
    EXPECT_EQ(codebench_cli({"--help"}).code, cli::exit_ok);
    TempDir dir;
    EXPECT_EQ(codebench_cli({"ingest", "-c", (dir.path() / "none.json").string()}).code, cli::exit_config);
    write_text(dir.path() / "bad.json", "{\"jobs\": ");
    auto r = codebench_cli({"ingest", "-c", (dir.path() / "bad.json").string()});
    EXPECT_EQ(r.code, cli::exit_config);
    EXPECT_NE(r.err.find("not valid JSON"), std::string::npos);
}

TEST(Cli, IngestFixtureCorpus)
{
    TempDir dir;
    auto r = codebench_cli({"ingest", "--corpus", (fixture_dir() / "corpus" / "fragments_10.jsonl").string(), "-o",
                            dir.path().string()});
    // One malformed record in the fixture: content failure exit, outputs still written.
    EXPECT_EQ(r.code, cli::exit_content);
    auto report = json::parse(read_text(dir.path() / "ingest_report.json"));
    EXPECT_EQ(report["loaded"], 9);
    EXPECT_EQ(report["skipped_malformed"], 1);
    auto kept = read_jsonl(dir.path() / "fragments.jsonl").records;
    EXPECT_EQ(kept.size(), report["kept"].get<std::size_t>());
    std::size_t prefiltered = 0;
    for (const auto& [k, v] : report["prefiltered"].items()) prefiltered += v.get<std::size_t>();
    EXPECT_EQ(kept.size() + prefiltered, 9u);
}

TEST(Cli, IngestEmptyCorpusAndBadPath)
{
    TempDir dir;
    write_text(dir.path() / "empty.jsonl", "");
    auto r = codebench_cli({"ingest", "--corpus", (dir.path() / "empty.jsonl").string(), "-o", dir.path().string()});
    EXPECT_EQ(r.code, cli::exit_ok);
    EXPECT_EQ(read_text(dir.path() / "fragments.jsonl"), "");
    EXPECT_NE(codebench_cli({"ingest", "--corpus", "/no/such/corpus.jsonl"}).code, cli::exit_ok);
}

TEST(Cli, GenerateReplayFixtureMatchesFrozenFunnel)
{
    TempDir dir;
    auto r = generate_replay(dir.path());
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    EXPECT_EQ(read_text(dir.path() / "funnel.txt"), read_text(replay_dir() / "funnel.txt"));
    EXPECT_EQ(read_text(dir.path() / "funnel.json"), read_text(replay_dir() / "funnel.json"));
    EXPECT_EQ(read_jsonl(dir.path() / "dataset.jsonl").records.size(), 8u);
}

TEST(Cli, GenerateIsIdempotentUnderReplay)
{
    TempDir a, b;
    ASSERT_EQ(generate_replay(a.path()).code, cli::exit_ok);
    ASSERT_EQ(generate_replay(b.path()).code, cli::exit_ok);
    for (const auto* name : {"dataset.jsonl", "funnel.json", "funnel.txt"})
        EXPECT_EQ(read_text(a.path() / name), read_text(b.path() / name)) << name;
}

TEST(Cli, GenerateRespectsCapOverrides)
{
    TempDir dir;
    auto r = generate_replay(dir.path(), {"--regenerations", "0"});
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    auto funnel = json::parse(read_text(dir.path() / "funnel.json"));
    // Without regenerations the lost-target, two-assert, short-context and shrunken-rewrite cases fail.
    EXPECT_EQ(funnel["failures"]["sandbox:target_missing"], 1);
    EXPECT_EQ(funnel["failures"]["tests:too_few_asserts"], 1);
    EXPECT_EQ(funnel["failures"]["sandbox:context_too_short"], 1);
    EXPECT_EQ(funnel["failures"]["debug:debug_rewrite_rejected"], 1);
    EXPECT_EQ(funnel["emitted"], 4);
}

TEST(Cli, GenerateWithoutCredentialsExitsEarly)
{
    TempDir dir;
    ::unsetenv("CODEBENCH_TEST_MISSING_KEY");
    json cfg = {{"models", {{"default", "remote"}}},
                {"providers", {{"remote", {{"base_url", "http://127.0.0.1:9/v1"}, {"api_key_env", "CODEBENCH_TEST_MISSING_KEY"}}}}},
                {"executor", {{"shim", codebench::testing::mini_shim_command()}}}};
    write_text(dir.path() / "cfg.json", cfg.dump());
    auto r = codebench_cli({"generate", "-c", (dir.path() / "cfg.json").string(), "--fragments",
                            (replay_dir() / "corpus.jsonl").string(), "-o", (dir.path() / "out").string()});
    EXPECT_EQ(r.code, cli::exit_config);
    EXPECT_NE(r.err.find("CODEBENCH_TEST_MISSING_KEY"), std::string::npos);
    EXPECT_FALSE(std::filesystem::exists(dir.path() / "out" / "dataset.jsonl"));
}

TEST(Cli, EvaluateOracleAndRounds)
{
    TempDir dir;
    ASSERT_EQ(generate_replay(dir.path()).code, cli::exit_ok);
    auto r = codebench_cli({"evaluate", "-c", replay_config(), "-o", dir.path().string(), "--model", "oracle", "-n", "10"});
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    auto report = json::parse(read_text(dir.path() / "report.json"));
    for (const auto* k : {"1", "2", "5", "10"}) EXPECT_EQ(report["pass_at_k"][k], 1.0) << k;
    EXPECT_EQ(read_jsonl(dir.path() / "results.jsonl").records.size(), 80u);

    // A generator that never answers correctly still yields the five-row accuracy table.
    cli::Hooks hooks;
    hooks.backends["stubborn"] = std::make_shared<llm::FunctionBackend>([](const llm::ChatRequest& req) {
        llm::ChatResponse resp;
        resp.samples.assign(req.n_samples, "```python\nreturn None\n```");
        return resp;
    });
    auto out = dir.path() / "rounds";
    auto rr = codebench_cli({"evaluate", "-o", out.string(), "--dataset", (dir.path() / "dataset.jsonl").string(),
                             "-c", replay_config(), "--replay-mode", "live", "--model", "stubborn", "-n", "1", "-k",
                             "1", "--rounds", "4"},
                            hooks);
    ASSERT_EQ(rr.code, cli::exit_ok) << rr.err;
    auto rep = json::parse(read_text(out / "report.json"));
    EXPECT_EQ(rep["accuracy_by_round"], json::array({0.0, 0.0, 0.0, 0.0, 0.0}));
    EXPECT_NE(read_text(out / "report.txt").find("4 | 0.0"), std::string::npos);
}

TEST(Cli, EvaluateUnknownModelIsConfigError)
{
    TempDir dir;
    write_text(dir.path() / "dataset.jsonl", "");
    auto r = codebench_cli({"evaluate", "-o", dir.path().string(), "--model", "nobody", "-c", replay_config(),
                            "--replay-mode", "live"});
    EXPECT_EQ(r.code, cli::exit_config);
    EXPECT_NE(r.err.find("unknown model alias"), std::string::npos);
}

TEST(Cli, AnalyzeMetricsOnlyAndMissingResults)
{
    TempDir dir;
    ASSERT_EQ(generate_replay(dir.path()).code, cli::exit_ok);
    auto r = codebench_cli({"analyze", "-o", dir.path().string()});
    ASSERT_EQ(r.code, cli::exit_ok) << r.err;
    auto a = json::parse(read_text(dir.path() / "analysis.json"));
    EXPECT_EQ(a["examples"], 8);
    EXPECT_FALSE(a.contains("breakdowns"));
    EXPECT_EQ(codebench_cli({"analyze", "-o", dir.path().string(), "--results", (dir.path() / "none.jsonl").string()}).code,
              cli::exit_config);
}

TEST(Cli, ServeStudyRefusesMissingDataset)
{
    TempDir dir;
    auto r = codebench_cli({"serve-study", "-c", replay_config(), "-o", dir.path().string(), "--port", "0"});
    EXPECT_EQ(r.code, cli::exit_config);
}

TEST(Cli, ServeStudyAnswersHealth)
{
    TempDir dir;
    ASSERT_EQ(generate_replay(dir.path()).code, cli::exit_ok);
    cli::Hooks hooks;
    int status = 0;
    std::string body;
    hooks.on_serving = [&](int port, study::StudyServer&) {
        httplib::Client client("127.0.0.1", port);
        auto res = client.Get("/health");
        if (res) {
            status = res->status;
            body = res->body;
        }
    };
    auto r = codebench_cli({"serve-study", "-c", replay_config(), "-o", dir.path().string(), "--port", "0"}, hooks);
    EXPECT_EQ(r.code, cli::exit_ok) << r.err;
    EXPECT_EQ(status, 200);
    EXPECT_EQ(json::parse(body)["status"], "ok");
}

TEST(ReplayFixture, FrozenFunnelAgreesWithScenarioCounts)
{
    // Counts derived by hand from the twelve scripted scenarios in tests/tools/record_replay_fixture.cpp:
    // six pass before debugging, one each after debug iterations 1, 2 and 3, one keeps failing,
    // two never leave sandboxing, one is dropped by the keyword filter.
    auto f = json::parse(read_text(replay_dir() / "funnel.json"));
    std::vector<int> steps;
    for (const auto& s : f["steps"]) steps.push_back(s["examples"].get<int>());
    EXPECT_EQ(steps, (std::vector<int>{12, 6, 7, 8, 9, 8}));
    EXPECT_EQ(f["failures"], json({{"debug:tests_failing", 1},
                                   {"final_filter:os.system", 1},
                                   {"sandbox:refusal", 1},
                                   {"sandbox:target_dissimilar", 1}}));
    // sandbox 20 + tests 11 + debug 10 + instruction 11 + augment 9
    EXPECT_EQ(f["llm_calls"], 61);
    // one execution per debug round: 1+1+1+2+3+4+1+1+1+4
    EXPECT_EQ(f["debug_executions"], 19);
    EXPECT_EQ(f["stages"]["sandbox"]["entered"], 20);
    EXPECT_EQ(f["stages"]["sandbox"]["regenerating"], 8);
    EXPECT_EQ(f["rejected_rewrites"], 1);
    EXPECT_EQ(f["instruction_degraded"], 1);
    EXPECT_EQ(f["augmented"], 1);
    EXPECT_EQ(read_jsonl(replay_dir() / "corpus.jsonl").records.size(), 12u);
}

// Acceptance gate: one PASS/FAIL/SKIP line per criterion, exit status 1 when any line fails.
#include "codebench/analysis/metrics.hpp"
#include "codebench/analysis/pass_at_k.hpp"
#include "codebench/analysis/similarity.hpp"
#include "codebench/cli/app.hpp"
#include "codebench/eval/harness.hpp"
#include "codebench/eval/prompt.hpp"
#include "codebench/pipeline/stages.hpp"
#include "codebench/pipeline/templates.hpp"
#include "codebench/python/syntax_tree.hpp"
#include "support/fake_installer.hpp"
#include "support/sample_examples.hpp"
#include "support/test_support.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <future>
#include <iostream>
#include <sstream>

using namespace codebench;
using namespace codebench::testing::samples;
using codebench::testing::fixture_dir;
using codebench::testing::read_fixture;
using codebench::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail)
{
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name << ": " << detail << std::endl;
}

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct World {
    TempDir dir;
    executor::EnvironmentManager envs{dir.path() / "envs", std::make_shared<codebench::testing::FakeInstaller>()};
    executor::Executor executor{executor::ExecutorConfig{codebench::testing::mini_shim_command(), dir.path() / "scratch"}};
    std::shared_ptr<const executor::Environment> env = envs.build({});
    std::vector<pipeline::EvalExample> emitted;  // replay-fixture dataset, filled by the emission check
};

// ---------------------------------------------------------------- pass@k

void check_pass_at_k()
{
    auto t0 = Clock::now();
    std::size_t cases = 0, bad = 0;
    for (int n = 1; n <= 8; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                long long hit = 0, total = 0;
                for (unsigned mask = 0; mask < (1u << n); ++mask) {
                    if (__builtin_popcount(mask) != k) continue;
                    ++total;
                    hit += (mask & ((1u << c) - 1)) != 0;
                }
                ++cases;
                if (analysis::pass_at_k_exact(n, c, k) != analysis::Rational(hit, total)) ++bad;
            }
        }
    }
    double t = seconds_since(t0);
    report("pass@k exactness", bad == 0 && t < 1.0,
           fmt::format("{}/{} (n,c,k) cases equal subset enumeration exactly; {:.3f}s (limit 1s)", cases - bad, cases, t));
}

// ---------------------------------------------------------------- keyword filter

void check_keyword_filter(World& w)
{
    const auto& banned = corpus::banned_keywords();
    const std::string program = "LIMIT = 10\nSTEP = 2\n\n\ndef bump(x):\n    return min(x + STEP, LIMIT)\n\n\n"
                                "def bump_twice(x):\n    return bump(bump(x))\n";
    const std::string tests = "assert bump(1) == 3\nassert bump(9) == 10\nassert bump_twice(0) == 4\n";
    std::vector<pipeline::EvalExample> examples;
    for (std::size_t i = 0; i < banned.size(); ++i) {
        auto ex = make_example(fmt::format("kw{:02}", i), program, "bump", {tests});
        ex.context += "# " + banned[i] + "\n";
        examples.push_back(ex);
    }
    examples.push_back(make_example("control", program, "bump", {tests}));

    llm::Gateway gateway(llm::GatewayOptions{});
    pipeline::PipelineServices svc{gateway, w.executor, w.envs, pipeline::TemplateSet::builtin()};
    pipeline::PipelineConfig cfg;
    cfg.timeout = std::chrono::seconds(10);
    auto t0 = Clock::now();
    auto r = pipeline::final_filter(examples, svc, cfg);
    double t = seconds_since(t0);
    std::size_t rejected = 0;
    for (const auto& [id, reason] : r.dropped) rejected += id != "control";
    bool control_kept = r.kept.size() == 1 && r.kept[0].id == "control";
    report("Keyword-filter exactness", banned.size() == 36 && rejected == 36 && control_kept && t < 1.0,
           fmt::format("{}/{} keyword examples rejected, {}/1 clean control kept; {:.3f}s (limit 1s)", rejected,
                       banned.size(), control_kept ? 1 : 0, t));
}

// ---------------------------------------------------------------- emission soundness

void check_emission(World& w)
{
    auto t0 = Clock::now();
    auto fixture = fixture_dir() / "replay";
    auto out = w.dir.path() / "replay-out";
    std::ostringstream sout, serr;
    int rc = cli::run({"generate", "-c", (fixture / "config.json").string(), "--fragments",
                       (fixture / "corpus.jsonl").string(), "-o", out.string()},
                      sout, serr);
    if (rc != 0) {
        report("Emission soundness", false, "generate exited " + std::to_string(rc) + ": " + serr.str());
        return;
    }
    w.emitted = pipeline::load_dataset(out / "dataset.jsonl");
    std::size_t sets = 0, passing = 0;
    for (const auto& ex : w.emitted) {
        auto program = pipeline::assemble(ex.context, ex.target);
        for (const auto& t : ex.test_sets) {
            ++sets;
            executor::ExecutionJob job{program, t.code, ex.dependencies, std::chrono::seconds(30), false, false};
            passing += w.executor.execute(job, *w.env).passed();
        }
    }
    bool funnel_txt = read_text(out / "funnel.txt") == read_text(fixture / "funnel.txt");
    bool funnel_json = read_text(out / "funnel.json") == read_text(fixture / "funnel.json");
    double t = seconds_since(t0);
    std::size_t fragments = read_jsonl(fixture / "corpus.jsonl").records.size();
    report("Emission soundness",
           fragments >= 10 && !w.emitted.empty() && passing == sets && funnel_txt && funnel_json && t < 120.0,
           fmt::format("{} fragments, {} emitted; ground truth passes {}/{} test sets run independently; funnel "
                       "byte-identical to frozen fixture: {}; {:.1f}s (limit 120s)",
                       fragments, w.emitted.size(), passing, sets, funnel_txt && funnel_json ? "yes" : "no", t));
}

// ---------------------------------------------------------------- conjunction

void check_conjunction(World& w)
{
    auto ex = make_example("c", clamp_program, "clamp", {});
    auto program = pipeline::assemble(ex.context, ex.target);
    const std::vector<std::vector<std::string>> fixtures = {
        {clamp_tests, clamp_extra, "assert clamp(2, 0, 1) == 1\nassert clamp(2, 3, 4) == 3\nassert clamp(0, 0, 0) == 0\n"},
        {clamp_tests, "assert clamp(5, 0, 1) == 5\nassert clamp(1, 1, 1) == 1\nassert clamp(2, 2, 2) == 2\n", clamp_extra},
    };
    std::size_t checked = 0, agree = 0;
    for (const auto& sets : fixtures) {
        std::vector<std::size_t> order = {0, 1, 2};
        do {
            std::vector<std::string> permuted;
            for (auto i : order) permuted.push_back(sets[i]);
            auto r = executor::execute_all_sets(w.executor, program, permuted, *w.env, std::chrono::seconds(10));
            bool conj = r.reports.size() == 3;
            for (const auto& rep : r.reports) conj = conj && rep.passed();
            ++checked;
            agree += r.overall == conj && !r.infra;
        } while (std::next_permutation(order.begin(), order.end()));
    }
    report("Conjunction semantics", agree == checked && checked == 12,
           fmt::format("overall == AND(per-set) for {}/{} orderings (2 fixtures x 6 orderings of 3 sets)", agree,
                       checked));
}

// ---------------------------------------------------------------- supervision

void check_supervision(World& w)
{
    const std::string a_tests = "import os, time\n"
                                "with open('canary', 'w') as fh:\n    fh.write('A')\n"
                                "time.sleep(1.0)\n"
                                "assert 'canary' in os.listdir('.')\n";
    const std::string b_tests = "import os, time\n"
                                "time.sleep(0.3)\n"
                                "parent = os.path.dirname(os.getcwd())\n"
                                "found = [r for r, d, f in os.walk('/') if 'canary' in f and r.startswith(parent)]\n"
                                "assert found == []\n"
                                "assert os.listdir(parent) == [os.path.basename(os.getcwd())]\n";
    int ok = 0;
    double worst = 0;
    std::string note;
    for (int rep = 0; rep < 10; ++rep) {
        auto busy = std::async(std::launch::async, [&] {
            executor::ExecutionJob job{"def spin():\n    while True:\n        pass\n", "spin()\nassert True\n", {},
                                       std::chrono::duration<double>(2.0), false, false};
            auto t0 = Clock::now();
            auto r = w.executor.execute(job, *w.env);
            return std::make_pair(r.status, seconds_since(t0));
        });
        auto a = std::async(std::launch::async, [&] {
            return w.executor.execute({"x = 1\n", a_tests, {}, std::chrono::seconds(10), false, false}, *w.env);
        });
        auto b = std::async(std::launch::async, [&] {
            return w.executor.execute({"x = 2\n", b_tests, {}, std::chrono::seconds(10), false, false}, *w.env);
        });
        auto [status, elapsed] = busy.get();
        auto ra = a.get();
        auto rb = b.get();
        worst = std::max(worst, elapsed);
        bool good = status == executor::ExecStatus::timeout && elapsed < 4.0 && ra.passed() && rb.passed();
        ok += good;
        if (!good && note.empty())
            note = fmt::format(" (rep {}: {} after {:.2f}s, canary writer {}, observer {})", rep,
                               executor::to_string(status), elapsed, executor::to_string(ra.status),
                               executor::to_string(rb.status));
    }
    report("Executor supervision", ok == 10,
           fmt::format("{}/10 repetitions: busy loop under 2s timeout reported timeout (slowest kill {:.2f}s, limit "
                       "4s) and a concurrent job could not see the canary{}",
                       ok, worst, note));
}

// ---------------------------------------------------------------- oracle regression

void check_oracle(World& w)
{
    if (w.emitted.empty()) {
        report("Oracle-generator regression", false, "no emitted dataset");
        return;
    }
    eval::EvalConfig cfg;
    cfg.n_samples = 10;
    cfg.k_list = {1, 2, 5, 10};
    eval::OracleGenerator oracle;
    auto r = eval::evaluate(w.emitted, oracle, w.executor, *w.env, cfg);
    bool all = true;
    std::string values;
    for (auto k : cfg.k_list) {
        all = all && r.pass_at_k.at(k) == 1.0;
        values += fmt::format(" pass@{}={}", k, r.pass_at_k.at(k));
    }
    report("Oracle-generator regression", all,
           fmt::format("{} emitted examples, n=10:{} (required exactly 1.0)", w.emitted.size(), values));
}

// ---------------------------------------------------------------- metrics oracle

void check_metrics()
{
    auto oracle = json::parse(read_fixture("metrics/oracle.json"));
    std::size_t snippets = 0, exact = 0;
    for (const auto& [name, expected] : oracle.items()) {
        ++snippets;
        std::string code = read_fixture("metrics/snippets/" + name);
        auto tree = python::parse_module(code);
        auto span = analysis::function_span(tree, expected["target"].get<std::string>());
        if (!span) continue;
        auto m = analysis::compute_metrics(code, span);
        auto vars = expected["variables"].get<std::vector<std::string>>();
        exact += m.code_tokens == expected["code_tokens"].get<std::size_t>() &&
                 m.ast_depth == expected["ast_depth"].get<std::size_t>() &&
                 m.variables == std::set<std::string>(vars.begin(), vars.end());
    }
    auto pairs = json::parse(read_fixture("metrics/bleu_oracle.json"));
    std::size_t bleu_ok = 0;
    double worst = 0;
    for (const auto& p : pairs) {
        double got = analysis::bleu(p["candidate"].get<std::vector<std::string>>(),
                                    p["reference"].get<std::vector<std::string>>());
        double diff = std::abs(got - p["bleu"].get<double>());
        worst = std::max(worst, diff);
        bleu_ok += diff <= 1e-9;
    }
    bool jac = analysis::jaccard({"x", "y"}, {"x", "y"}) == 1.0 && analysis::jaccard({"a", "b"}, {"b", "c"}) == 1.0 / 3 &&
               analysis::jaccard({}, {}) == 1.0 && analysis::jaccard({"a"}, {}) == 0.0 &&
               analysis::jaccard({"a", "b", "c", "d"}, {"a", "b"}) == 0.5;
    report("Metrics oracle", snippets == 12 && exact == 12 && pairs.size() == 5 && bleu_ok == 5 && jac,
           fmt::format("{}/{} snippets exact (tokens, depth, variables); BLEU {}/5 within 1e-9 (max diff {:.1e}); "
                       "Jaccard analytic cases {}",
                       exact, snippets, bleu_ok, worst, jac ? "exact" : "wrong"));
}

// ---------------------------------------------------------------- refinement

void check_refinement(World& w)
{
    std::vector<std::string> problems;
    eval::EvalConfig cfg;
    cfg.max_rounds = 3;

    auto clamp = make_example("clamp", clamp_program, "clamp", {clamp_tests});
    eval::ScriptedGenerator stubborn("repeat-wrong", [](auto&, auto&, auto, auto) {
        return std::string("```python\ndef clamp(value, low, high):\n    return value if value > low else low\n```");
    });
    auto t1 = eval::refine_loop(clamp, stubborn, w.executor, *w.env, cfg);
    bool repeat_ok = t1.size() == 4 && std::none_of(t1.begin(), t1.end(), [](auto& s) { return s.passed; });
    for (std::size_t r = 1; r < t1.size(); ++r) {
        repeat_ok = repeat_ok && t1[r].prompt.rfind(t1[r - 1].prompt, 0) == 0 &&
                    t1[r].prompt.find("First failing assert: #3") != std::string::npos;
    }
    if (!repeat_ok) problems.push_back("repeat-wrong trajectory");

    auto net = make_example("net", net_program, "forward", {net_tests});
    eval::ScriptedGenerator learner("fix-after-error", [](const EvalExample& e, const std::string& prompt, auto, auto) {
        if (prompt.find("missing 1 required positional argument") != std::string::npos)
            return "```python\n" + e.target + "```";
        return std::string("```python\ndef forward(self, x):\n    return sum(feed_forward(x))\n```");
    });
    auto t2 = eval::refine_loop(net, learner, w.executor, *w.env, cfg);
    bool fix_ok = t2.size() == 2 && t2[0].reports[0].status == executor::ExecStatus::runtime_error && t2[1].passed;
    if (!fix_ok) problems.push_back("fix-after-error trajectory");

    // Mixed population: solved at round 0, 1, 3 or never.
    std::vector<EvalExample> ds;
    for (int i = 0; i < 8; ++i) ds.push_back(make_example("c" + std::to_string(i), clamp_program, "clamp", {clamp_tests}));
    eval::ScriptedGenerator mixed("mixed", [](const EvalExample& e, const std::string&, std::size_t round, std::size_t) {
        static const std::size_t solve_at[] = {0, 1, 3, 9, 0, 1, 9, 0};
        std::size_t i = std::stoul(e.id.substr(1));
        if (round >= solve_at[i]) return "```python\n" + e.target + "```";
        return std::string("```python\nreturn low\n```");
    });
    auto trajectories = eval::refine_all(ds, mixed, w.executor, *w.env, cfg);
    auto acc = eval::accuracy_by_round(trajectories, 4);
    eval::EvalConfig one;
    one.n_samples = 1;
    one.k_list = {1};
    auto pass1 = eval::evaluate(ds, mixed, w.executor, *w.env, one).pass_at_k.at(1);
    bool monotone = std::is_sorted(acc.begin(), acc.end());
    bool expected = acc == std::vector<double>{3.0 / 8, 5.0 / 8, 5.0 / 8, 6.0 / 8};
    if (!monotone || !expected) problems.push_back("accuracy_by_round");
    if (acc[0] != pass1) problems.push_back("round 0 != pass@1");
    report("Refinement protocol", problems.empty(),
           fmt::format("repeat-wrong 4 rounds unsolved with growing prompts: {}; fix after 'missing 1 required "
                       "positional argument' at round 1: {}; accuracy_by_round {:.3f}/{:.3f}/{:.3f}/{:.3f} monotone, "
                       "round 0 = pass@1 = {:.3f}{}",
                       repeat_ok ? "yes" : "no", fix_ok ? "yes" : "no", acc[0], acc[1], acc[2], acc[3], pass1,
                       problems.empty() ? "" : " [" + fmt::format("{}", fmt::join(problems, ", ")) + "]"));
}

// ---------------------------------------------------------------- prompt hygiene

// Brute force: every 20-character substring of every test set, searched in every prompt.
std::size_t hygiene_hits(const EvalExample& ex, const std::vector<std::string>& prompts)
{
    std::size_t hits = 0;
    for (const auto& t : ex.test_codes()) {
        for (std::size_t i = 0; i + 20 <= t.size(); ++i) {
            auto window = t.substr(i, 20);
            for (const auto& p : prompts) hits += p.find(window) != std::string::npos;
        }
    }
    return hits;
}

void check_hygiene(World& w)
{
    if (w.emitted.empty()) {
        report("Prompt hygiene", false, "no emitted dataset");
        return;
    }
    eval::EvalConfig cfg;
    cfg.max_rounds = 3;
    // Wrong answers keep the loop going, so every round's feedback (with failing-assert tracebacks) is scanned.
    eval::ScriptedGenerator wrong("wrong", [](const EvalExample& e, const std::string&, auto, auto) {
        return "```python\n" + e.function_header + "\n    return None\n```";
    });
    std::size_t prompts = 0, hits = 0;
    for (const auto& ex : w.emitted) {
        auto t = eval::refine_loop(ex, wrong, w.executor, *w.env, cfg);
        std::vector<std::string> ps = {eval::build_prompt(ex)};
        for (const auto& s : t) ps.push_back(s.prompt);
        prompts += ps.size();
        hits += hygiene_hits(ex, ps);
    }
    report("Prompt hygiene", hits == 0,
           fmt::format("{} hits of 20-character test substrings over {} prompts ({} examples x 4 rounds + round-0 "
                       "builds)",
                       hits, prompts, w.emitted.size()));
}

}  // namespace

int main()
{
    World w;
    check_pass_at_k();
    check_keyword_filter(w);
    check_emission(w);
    check_conjunction(w);
    check_supervision(w);
    check_oracle(w);
    check_metrics();
    check_refinement(w);
    check_hygiene(w);
    std::cout << "SKIP  Sanity anchors: needs the released benchmark data (not bundled, no network); tolerances "
                 "would be code tokens 491.88 +-1%, test cases 8.79 +-1%, AST depth 9.38 +-5%"
              << std::endl;
    std::cout << (failures == 0 ? "acceptance: all required criteria pass" : "acceptance: FAILURES present")
              << std::endl;
    return failures == 0 ? 0 : 1;
}

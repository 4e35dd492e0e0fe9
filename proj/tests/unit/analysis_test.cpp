#include "codebench/analysis/breakdown.hpp"
#include "codebench/analysis/metrics.hpp"
#include "codebench/analysis/pass_at_k.hpp"
#include "codebench/analysis/similarity.hpp"
#include "codebench/python/tokenizer.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>

using namespace codebench::analysis;
using codebench::testing::fixture_dir;
using codebench::testing::read_fixture;
using nlohmann::json;

namespace {

std::set<std::string> as_set(const json& arr)
{
    std::set<std::string> s;
    for (const auto& v : arr) s.insert(v.get<std::string>());
    return s;
}

// Brute force: fraction of k-subsets of n samples (c of them correct) containing a correct one.
Rational enumerate_pass_at_k(int n, int c, int k)
{
    long long hits = 0;
    long long total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        ++total;
        if ((mask & ((1u << c) - 1)) != 0) ++hits;
    }
    return Rational(hits, total);
}

}  // namespace

TEST(Metrics, MatchesFrozenOracleOnSnippetFixture)
{
    auto oracle = json::parse(read_fixture("metrics/oracle.json"));
    ASSERT_EQ(oracle.size(), 12u);
    for (const auto& [name, expected] : oracle.items()) {
        SCOPED_TRACE(name);
        std::string code = read_fixture("metrics/snippets/" + name);
        auto tree = codebench::python::parse_module(code);
        auto span = function_span(tree, expected["target"].get<std::string>());
        ASSERT_TRUE(span.has_value());
        EXPECT_EQ(span->begin, expected["span"][0].get<std::size_t>());
        EXPECT_EQ(span->end, expected["span"][1].get<std::size_t>());
        auto m = compute_metrics(code, span);
        EXPECT_EQ(m.code_tokens, expected["code_tokens"].get<std::size_t>());
        EXPECT_EQ(m.ast_depth, expected["ast_depth"].get<std::size_t>());
        EXPECT_EQ(m.variables, as_set(expected["variables"]));
        EXPECT_EQ(m.stdlib_imports, as_set(expected["stdlib_imports"]));
        EXPECT_EQ(m.external_imports, as_set(expected["external_imports"]));
        EXPECT_EQ(m.function_calls_in_target, expected["function_calls_in_target"].get<std::size_t>());
    }
}

TEST(Metrics, EmptyTargetSpan)
{
    auto m = compute_metrics("def f(a):\n    return g(a)\n", TextSpan{0, 0});
    EXPECT_TRUE(m.variables.empty());
    EXPECT_EQ(m.function_calls_in_target, 0u);
}

TEST(Metrics, ImportClassification)
{
    auto m = compute_metrics("import os, requests\n");
    EXPECT_EQ(m.stdlib_imports, std::set<std::string>{"os"});
    EXPECT_EQ(m.external_imports, std::set<std::string>{"requests"});
}

TEST(Metrics, TokenCountIgnoresCommentsAndTrailingWhitespace)
{
    std::string base = "def f(x):\n    y = x + 1\n    return y\n";
    std::string noisy = "# header\ndef f(x):   \n    # inside\n    y = x + 1  # add\n\n    return y    \n";
    EXPECT_EQ(compute_metrics(base).code_tokens, compute_metrics(noisy).code_tokens);
}

TEST(Metrics, ParseFailureCarriesLocation)
{
    EXPECT_THROW(compute_metrics("def f(:\n"), codebench::python::SyntaxError);
}

TEST(Metrics, StdlibListIsPinned)
{
    EXPECT_EQ(stdlib_modules().size(), 303u);
    EXPECT_TRUE(is_stdlib_module("collections"));
    EXPECT_TRUE(is_stdlib_module("__future__"));
    EXPECT_FALSE(is_stdlib_module("numpy"));
}

TEST(Bleu, MatchesReferenceImplementation)
{
    auto pairs = json::parse(read_fixture("metrics/bleu_oracle.json"));
    ASSERT_EQ(pairs.size(), 5u);
    for (const auto& p : pairs) {
        SCOPED_TRACE(p["name"].get<std::string>());
        auto cand = p["candidate"].get<std::vector<std::string>>();
        auto ref = p["reference"].get<std::vector<std::string>>();
        EXPECT_NEAR(bleu(cand, ref), p["bleu"].get<double>(), 1e-9);
    }
}

TEST(Bleu, IdentityAndDisjoint)
{
    std::vector<std::string> x = {"return", "a", "+", "b", "*", "c"};
    EXPECT_DOUBLE_EQ(bleu(x, x), 1.0);
    std::vector<std::string> y = {"p", "q", "r", "s", "t"};
    EXPECT_EQ(bleu(y, x), 0.0);
    EXPECT_THROW(bleu(x, {}), std::invalid_argument);
}

TEST(Bleu, InvariantUnderConsistentRenaming)
{
    std::vector<std::string> a = {"x", "=", "f", "(", "y", ")", "+", "y"};
    std::vector<std::string> b = {"x", "=", "f", "(", "z", ")", "-", "y"};
    auto rename = [](std::vector<std::string> v) {
        for (auto& t : v) {
            if (t == "y") t = "w";
            else if (t == "x") t = "v";
        }
        return v;
    };
    EXPECT_DOUBLE_EQ(bleu(a, b), bleu(rename(a), rename(b)));
}

TEST(Jaccard, AnalyticCases)
{
    EXPECT_EQ(jaccard({"x", "y"}, {"x", "y"}), 1.0);
    EXPECT_EQ(jaccard({"a", "b"}, {"b", "c"}), 1.0 / 3.0);
    EXPECT_EQ(jaccard({}, {}), 1.0);
    EXPECT_EQ(jaccard({"a"}, {}), 0.0);
    EXPECT_EQ(jaccard({"a", "b", "c"}, {"c"}), jaccard({"c"}, {"a", "b", "c"}));
}

TEST(PassAtK, DocumentedValues)
{
    EXPECT_EQ(pass_at_k(10, 10, 5), 1.0);
    EXPECT_EQ(pass_at_k(10, 0, 5), 0.0);
    EXPECT_EQ(pass_at_k_exact(5, 2, 2), Rational(7, 10));
    EXPECT_NEAR(pass_at_k(5, 2, 2), 0.7, 1e-15);
    EXPECT_EQ(pass_at_k_exact(4, 2, 2), Rational(5, 6));
    EXPECT_THROW(pass_at_k(3, 1, 4), std::invalid_argument);
    EXPECT_THROW(pass_at_k(3, 4, 1), std::invalid_argument);
    EXPECT_THROW(pass_at_k(3, 1, 0), std::invalid_argument);
}

TEST(PassAtK, ExactAgainstSubsetEnumeration)
{
    for (int n = 1; n <= 8; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                auto expected = enumerate_pass_at_k(n, c, k);
                EXPECT_EQ(pass_at_k_exact(n, c, k), expected) << n << " " << c << " " << k;
                EXPECT_NEAR(pass_at_k(n, c, k), expected.convert_to<double>(), 1e-12);
            }
        }
    }
}

TEST(PassAtK, MonotoneInKAndC)
{
    for (std::size_t n = 1; n <= 20; ++n) {
        for (std::size_t c = 0; c <= n; ++c) {
            for (std::size_t k = 1; k <= n; ++k) {
                double v = pass_at_k(n, c, k);
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
                if (k > 1) EXPECT_GE(v, pass_at_k(n, c, k - 1));
                if (c > 0) EXPECT_GE(v, pass_at_k(n, c - 1, k));
            }
        }
    }
}

TEST(Breakdown, ConsecutivePairs)
{
    std::vector<BreakdownPoint> pts;
    for (int i = 1; i <= 10; ++i) pts.push_back({"e" + std::to_string(100 + i), double(i), i % 2 ? 1.0 : 0.0});
    auto bins = breakdown(Factor::target_length, pts);
    ASSERT_EQ(bins.size(), 5u);
    for (std::size_t b = 0; b < 5; ++b) {
        EXPECT_EQ(bins[b].low, 2.0 * b + 1);
        EXPECT_EQ(bins[b].high, 2.0 * b + 2);
        EXPECT_EQ(bins[b].mean, 0.5);
    }
}

TEST(Breakdown, TiesSplitByIdOrder)
{
    std::vector<BreakdownPoint> pts;
    for (int i = 11; i >= 0; --i) pts.push_back({"id" + std::to_string(10 + i), 3.0, 1.0});
    auto bins = quantile_breakdown(pts);
    ASSERT_EQ(bins.size(), 5u);
    std::vector<std::size_t> sizes;
    for (const auto& b : bins) {
        sizes.push_back(b.ids.size());
        EXPECT_EQ(b.mean, 1.0);
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 2, 2, 2}));
    EXPECT_EQ(bins[0].ids, (std::vector<std::string>{"id10", "id11", "id12"}));
}

TEST(Breakdown, SeededTwentyFiveExampleFixture)
{
    // factor = 7i mod 25 permutes 0..24; score 1 exactly when the factor is a multiple of 3.
    std::vector<BreakdownPoint> pts;
    for (int i = 0; i < 25; ++i) {
        int f = (7 * i) % 25;
        pts.push_back({"e" + std::to_string(10 + i), double(f), f % 3 == 0 ? 1.0 : 0.0});
    }
    auto bins = breakdown(Factor::context_length, pts);
    std::vector<double> means;
    for (const auto& b : bins) means.push_back(b.mean);
    EXPECT_EQ(means, (std::vector<double>{0.4, 0.4, 0.2, 0.4, 0.4}));
    EXPECT_EQ(bins[2].low, 10.0);
    EXPECT_EQ(bins[2].high, 14.0);
}

TEST(Breakdown, ImportClassGroupsByCategory)
{
    std::vector<BreakdownPoint> pts = {{"a", 0, 1}, {"b", 2, 0}, {"c", 1, 1}, {"d", 2, 1}, {"e", 0, 0}, {"f", 1, 1}};
    auto bins = breakdown(Factor::import_class, pts);
    ASSERT_EQ(bins.size(), 3u);
    EXPECT_EQ(bins[0].label, "none");
    EXPECT_EQ(bins[1].label, "standard");
    EXPECT_EQ(bins[2].label, "external");
    EXPECT_EQ(bins[1].mean, 1.0);
}

TEST(Breakdown, TooFewExamples)
{
    std::vector<BreakdownPoint> pts = {{"a", 1, 1}, {"b", 2, 1}};
    EXPECT_THROW(breakdown(Factor::function_calls, pts), std::invalid_argument);
}

#include "codebench/python/syntax_tree.hpp"
#include "codebench/python/tokenizer.hpp"

#include <gtest/gtest.h>

using namespace codebench::python;

namespace {

std::vector<std::string> types_of(std::string_view src)
{
    std::vector<std::string> out;
    for (const auto& t : tokenize(src)) out.emplace_back(to_string(t.type));
    return out;
}

}  // namespace

TEST(Tokenizer, SimpleFunction)
{
    auto types = types_of("def f():\n    return 1\n");
    std::vector<std::string> expected = {"NAME", "NAME", "OP", "OP", "OP", "NEWLINE", "INDENT", "NAME",
                                         "NUMBER", "NEWLINE", "DEDENT", "ENDMARKER"};
    EXPECT_EQ(types, expected);
}

TEST(Tokenizer, CommentsAndBlankLinesAreNotCodeTokens)
{
    EXPECT_EQ(count_code_tokens("x = 1\n"), 3u);
    EXPECT_EQ(count_code_tokens("# lead\n\nx = 1  # trailing\n\n"), 3u);
}

TEST(Tokenizer, NumbersAndStrings)
{
    auto texts = code_token_texts("a = 0x1f + 1_000.5e-3j - rb'\\x' + f\"{a}\"\n");
    std::vector<std::string> expected = {"a", "=", "0x1f", "+", "1_000.5e-3j", "-", "rb'\\x'", "+", "f\"{a}\""};
    EXPECT_EQ(texts, expected);
}

TEST(Tokenizer, TripleQuotedStringSpansLines)
{
    auto texts = code_token_texts("s = '''a\nb'''\n");
    ASSERT_EQ(texts.size(), 3u);
    EXPECT_EQ(texts[2], "'''a\nb'''");
}

TEST(Tokenizer, InconsistentDedentThrows)
{
    EXPECT_THROW(tokenize("if x:\n        a\n    b\n"), SyntaxError);
}

TEST(Tokenizer, MissingTrailingNewlineStillTerminatesStatement)
{
    auto types = types_of("x");
    std::vector<std::string> expected = {"NAME", "NEWLINE", "ENDMARKER"};
    EXPECT_EQ(types, expected);
}

TEST(Parser, ReturnConstantDepth)
{
    auto tree = parse_module("def f():\n    return 1\n");
    EXPECT_EQ(tree.dump(),
              "(module (function_definition (\"def\") (identifier) (parameters (\"(\") (\")\")) (\":\") "
              "(block (return_statement (\"return\") (integer)))))");
    EXPECT_EQ(tree.depth(), 5u);
}

TEST(Parser, CompositeComparisonOperators)
{
    auto tree = parse_module("a is not b not in c\n");
    EXPECT_EQ(tree.dump(),
              "(module (expression_statement (comparison_operator (identifier) (\"is not\" (\"is\") (\"not\")) "
              "(identifier) (\"not in\" (\"not\") (\"in\")) (identifier))))");
}

TEST(Parser, AssignmentTargetsBecomePatterns)
{
    auto tree = parse_module("a, [b, *c] = x\n");
    EXPECT_EQ(tree.dump(),
              "(module (expression_statement (assignment (pattern_list (identifier) (\",\") (list_pattern (\"[\") "
              "(identifier) (\",\") (list_splat_pattern (\"*\") (identifier)) (\"]\"))) (\"=\") (identifier))))");
}

TEST(Parser, FormatStringInterpolation)
{
    auto tree = parse_module("f'{x!r:>{w}}'\n");
    EXPECT_EQ(tree.dump(),
              "(module (expression_statement (string (string_start) (interpolation (\"{\") (identifier) "
              "(type_conversion) (format_specifier (\":\") (format_expression (\"{\") (identifier) (\"}\"))) "
              "(\"}\")) (string_end))))");
}

TEST(Parser, GenericAnnotations)
{
    auto tree = parse_module("x: list[int] | None\n");
    EXPECT_EQ(tree.dump(),
              "(module (expression_statement (assignment (identifier) (\":\") (type (union_type (type (generic_type "
              "(identifier) (type_parameter (\"[\") (type (identifier)) (\"]\")))) (\"|\") (type (none)))))))");
}

TEST(Parser, CommentsDoNotAppearInTree)
{
    auto a = parse_module("x = 1\n");
    auto b = parse_module("# note\nx = 1  # trailing\n");
    EXPECT_EQ(a.dump(), b.dump());
}

TEST(Parser, EmptyModule)
{
    auto tree = parse_module("");
    EXPECT_EQ(tree.depth(), 1u);
    EXPECT_TRUE(parses("\n\n# only a comment\n"));
}

TEST(Parser, RejectsBrokenCode)
{
    EXPECT_FALSE(parses("def f(:\n    pass\n"));
    EXPECT_FALSE(parses("x = (1,\n"));
    EXPECT_FALSE(parses("if x:\npass\n"));
    EXPECT_FALSE(parses("return return\n"));
}

TEST(Parser, SyntaxErrorCarriesLocation)
{
    try {
        (void)parse_module("x = 1\ny = )\n");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.location().line, 2u);
        EXPECT_EQ(e.location().column, 4u);
    }
}

TEST(Parser, NodeSpansCoverSource)
{
    std::string src = "class A:\n    def m(self, x=[1, 2]):\n        return {k: v for k, v in x}\n";
    auto tree = parse_module(src);
    const auto& cls = *tree.root().children.front();
    EXPECT_EQ(cls.kind, "class_definition");
    EXPECT_EQ(tree.text(cls), std::string_view(src).substr(0, src.size() - 1));
    std::size_t calls = 0;
    walk(tree.root(), [&](const SyntaxNode& n) {
        if (n.is("dictionary_comprehension")) ++calls;
        return true;
    });
    EXPECT_EQ(calls, 1u);
}

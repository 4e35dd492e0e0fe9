#include "codebench/python/syntax_tree.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace codebench::python {

std::size_t SyntaxNode::depth() const
{
    std::size_t deepest = 0;
    for (const auto& c : children) {
        deepest = std::max(deepest, c->depth());
    }
    return deepest + 1;
}

const SyntaxNode* SyntaxNode::child_of_kind(std::string_view k) const
{
    for (const auto& c : children) {
        if (c->kind == k) return c.get();
    }
    return nullptr;
}

SyntaxTree::SyntaxTree(std::string source, std::unique_ptr<SyntaxNode> root)
    : source_(std::move(source)), root_(std::move(root))
{
}

std::string_view SyntaxTree::text(const SyntaxNode& node) const
{
    return std::string_view(source_).substr(node.begin, node.end - node.begin);
}

namespace {

void dump_node(const SyntaxNode& n, std::ostringstream& out)
{
    out << '(';
    if (n.named) {
        out << n.kind;
    } else {
        out << '"' << n.kind << '"';
    }
    for (const auto& c : n.children) {
        out << ' ';
        dump_node(*c, out);
    }
    out << ')';
}

}  // namespace

std::string SyntaxTree::dump() const
{
    std::ostringstream out;
    dump_node(*root_, out);
    return out.str();
}

void walk(const SyntaxNode& node, const std::function<bool(const SyntaxNode&)>& visit)
{
    if (!visit(node)) return;
    for (const auto& c : node.children) {
        walk(*c, visit);
    }
}

namespace {

using NodePtr = std::unique_ptr<SyntaxNode>;

constexpr std::array<std::string_view, 33> kHardKeywords = {
    "False", "None",   "True",    "and",      "as",   "assert", "async", "await", "break",
    "class", "continue", "def",   "del",      "elif", "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",   "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",  "while",
};

bool is_hard_keyword(std::string_view s)
{
    if (s == "with" || s == "yield") return true;
    return std::find(kHardKeywords.begin(), kHardKeywords.end(), s) != kHardKeywords.end();
}

class LineIndex {
public:
    explicit LineIndex(std::string_view src)
    {
        starts_.push_back(0);
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src[i] == '\n') starts_.push_back(i + 1);
        }
    }

    SourceLocation at(std::size_t offset) const
    {
        auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
        std::size_t line = static_cast<std::size_t>(it - starts_.begin());
        return {line, offset - starts_[line - 1]};
    }

private:
    std::vector<std::size_t> starts_;
};

class Parser {
public:
    Parser(std::string_view src, const LineIndex& lines, std::vector<Token> tokens)
        : src_(src), lines_(lines)
    {
        for (auto& t : tokens) {
            if (t.type != TokenType::Comment && t.type != TokenType::Nl) {
                toks_.push_back(t);
            }
        }
        if (toks_.empty() || toks_.back().type != TokenType::EndMarker) {
            std::size_t e = toks_.empty() ? 0 : toks_.back().end;
            toks_.push_back(Token{TokenType::EndMarker, e, e, lines_.at(e), {}});
        }
    }

    NodePtr module()
    {
        auto root = make("module");
        while (!at_type(TokenType::EndMarker)) {
            if (at_type(TokenType::Newline)) {
                next();
                continue;
            }
            statement(root->children);
        }
        finish(*root);
        if (root->children.empty()) {
            root->begin = root->end = 0;
        }
        return root;
    }

    // Entry point for f-string replacement fields.
    NodePtr replacement_expression()
    {
        NodePtr e;
        if (at_name("yield")) {
            e = yield_expression();
        } else {
            e = star_expressions(false);
        }
        if (!at_type(TokenType::EndMarker)) fail("unexpected token in replacement field");
        return e;
    }

private:
    // ---- token helpers -------------------------------------------------------------
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at_type(TokenType t, std::size_t k = 0) const { return peek(k).type == t; }
    bool at_op(std::string_view s, std::size_t k = 0) const
    {
        return peek(k).type == TokenType::Op && peek(k).text == s;
    }
    bool at_name(std::string_view s, std::size_t k = 0) const
    {
        return peek(k).type == TokenType::Name && peek(k).text == s;
    }
    const Token& next()
    {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        const Token& t = peek();
        std::string near = t.type == TokenType::EndMarker ? "end of input" : "'" + std::string(t.text) + "'";
        throw SyntaxError(what + " near " + near, t.location);
    }

    const Token& expect_op(std::string_view s)
    {
        if (!at_op(s)) fail("expected '" + std::string(s) + "'");
        return next();
    }
    const Token& expect_name(std::string_view s)
    {
        if (!at_name(s)) fail("expected '" + std::string(s) + "'");
        return next();
    }

    // ---- node helpers --------------------------------------------------------------
    NodePtr make(std::string kind, bool named = true) const
    {
        auto n = std::make_unique<SyntaxNode>();
        n->kind = std::move(kind);
        n->named = named;
        return n;
    }

    NodePtr span_leaf(std::string kind, bool named, std::size_t b, std::size_t e) const
    {
        auto n = make(std::move(kind), named);
        n->begin = b;
        n->end = e;
        n->location = lines_.at(b);
        return n;
    }

    NodePtr leaf(const Token& t) const { return span_leaf(std::string(t.text), false, t.begin, t.end); }
    NodePtr named_leaf(std::string kind, const Token& t) const { return span_leaf(std::move(kind), true, t.begin, t.end); }

    void finish(SyntaxNode& n) const
    {
        if (!n.children.empty()) {
            n.begin = n.children.front()->begin;
            n.end = n.children.back()->end;
            n.location = n.children.front()->location;
        }
    }

    template <typename... Ts>
    NodePtr node(std::string kind, Ts&&... kids) const
    {
        auto n = make(std::move(kind));
        (n->children.push_back(std::forward<Ts>(kids)), ...);
        finish(*n);
        return n;
    }

    NodePtr node_from(std::string kind, std::vector<NodePtr> kids) const
    {
        auto n = make(std::move(kind));
        n->children = std::move(kids);
        finish(*n);
        return n;
    }

    NodePtr identifier()
    {
        if (!at_type(TokenType::Name) || is_hard_keyword(peek().text)) fail("expected identifier");
        return named_leaf("identifier", next());
    }

    // ---- statements ----------------------------------------------------------------
    void statement(std::vector<NodePtr>& out)
    {
        const Token& t = peek();
        if (t.type == TokenType::Indent) fail("unexpected indent");
        if (t.type == TokenType::Op && t.text == "@") {
            out.push_back(decorated_definition());
            return;
        }
        if (t.type == TokenType::Name) {
            std::string_view w = t.text;
            if (w == "if") return out.push_back(if_statement());
            if (w == "while") return out.push_back(while_statement());
            if (w == "for") return out.push_back(for_statement(nullptr));
            if (w == "try") return out.push_back(try_statement());
            if (w == "with") return out.push_back(with_statement(nullptr));
            if (w == "def") return out.push_back(function_definition(nullptr));
            if (w == "class") return out.push_back(class_definition());
            if (w == "async") {
                if (at_name("def", 1)) {
                    auto kw = leaf(next());
                    return out.push_back(function_definition(std::move(kw)));
                }
                if (at_name("for", 1)) {
                    auto kw = leaf(next());
                    return out.push_back(for_statement(std::move(kw)));
                }
                if (at_name("with", 1)) {
                    auto kw = leaf(next());
                    return out.push_back(with_statement(std::move(kw)));
                }
            }
        }
        simple_statements(out);
    }

    void simple_statements(std::vector<NodePtr>& out)
    {
        for (;;) {
            out.push_back(simple_statement());
            if (at_op(";")) {
                out.push_back(leaf(next()));
                if (at_type(TokenType::Newline) || at_type(TokenType::EndMarker)) break;
                continue;
            }
            break;
        }
        if (at_type(TokenType::Newline)) {
            next();
        } else if (!at_type(TokenType::EndMarker)) {
            fail("invalid syntax");
        }
    }

    NodePtr keyword_statement(const char* kind)
    {
        return node(kind, leaf(next()));
    }

    bool starts_print_statement() const
    {
        if (!at_name("print")) return false;
        const Token& n = peek(1);
        if (n.type == TokenType::Op) {
            return n.text == ">>";
        }
        if (n.type == TokenType::Name) return !is_hard_keyword(n.text) || n.text == "not" || n.text == "lambda";
        return n.type == TokenType::String || n.type == TokenType::Number;
    }

    NodePtr simple_statement()
    {
        const Token& t = peek();
        if (t.type == TokenType::Name) {
            std::string_view w = t.text;
            if (w == "pass") return keyword_statement("pass_statement");
            if (w == "break") return keyword_statement("break_statement");
            if (w == "continue") return keyword_statement("continue_statement");
            if (w == "return") return return_statement();
            if (w == "del") return delete_statement();
            if (w == "raise") return raise_statement();
            if (w == "global") return name_list_statement("global_statement");
            if (w == "nonlocal") return name_list_statement("nonlocal_statement");
            if (w == "assert") return assert_statement();
            if (w == "import") return import_statement();
            if (w == "from") return import_from_statement();
            if (starts_print_statement()) return print_statement();
        }
        return expression_statement();
    }

    NodePtr return_statement()
    {
        auto n = make("return_statement");
        n->children.push_back(leaf(next()));
        if (!at_statement_end()) {
            n->children.push_back(star_expressions(false));
        }
        finish(*n);
        return n;
    }

    bool at_statement_end() const
    {
        return at_type(TokenType::Newline) || at_type(TokenType::EndMarker) || at_op(";");
    }

    NodePtr delete_statement()
    {
        auto n = make("delete_statement");
        n->children.push_back(leaf(next()));
        n->children.push_back(star_expressions(false));
        finish(*n);
        return n;
    }

    NodePtr raise_statement()
    {
        auto n = make("raise_statement");
        n->children.push_back(leaf(next()));
        if (!at_statement_end()) {
            n->children.push_back(star_expressions(false));
            if (at_name("from")) {
                n->children.push_back(leaf(next()));
                n->children.push_back(expression());
            }
        }
        finish(*n);
        return n;
    }

    NodePtr name_list_statement(const char* kind)
    {
        auto n = make(kind);
        n->children.push_back(leaf(next()));
        n->children.push_back(identifier());
        while (at_op(",")) {
            n->children.push_back(leaf(next()));
            n->children.push_back(identifier());
        }
        finish(*n);
        return n;
    }

    NodePtr assert_statement()
    {
        auto n = make("assert_statement");
        n->children.push_back(leaf(next()));
        n->children.push_back(expression());
        if (at_op(",")) {
            n->children.push_back(leaf(next()));
            n->children.push_back(expression());
        }
        finish(*n);
        return n;
    }

    NodePtr print_statement()
    {
        auto n = make("print_statement");
        n->children.push_back(leaf(next()));
        if (at_op(">>")) {
            auto op = leaf(next());
            n->children.push_back(node("chevron", std::move(op), expression()));
            if (at_op(",")) n->children.push_back(leaf(next()));
        }
        while (!at_statement_end()) {
            n->children.push_back(expression());
            if (!at_op(",")) break;
            n->children.push_back(leaf(next()));
        }
        finish(*n);
        return n;
    }

    NodePtr dotted_name()
    {
        auto n = make("dotted_name");
        n->children.push_back(identifier());
        while (at_op(".")) {
            n->children.push_back(leaf(next()));
            n->children.push_back(identifier());
        }
        finish(*n);
        return n;
    }

    NodePtr import_item()
    {
        auto name = dotted_name();
        if (at_name("as")) {
            auto as = leaf(next());
            return node("aliased_import", std::move(name), std::move(as), identifier());
        }
        return name;
    }

    void import_list(std::vector<NodePtr>& out, bool parenthesized)
    {
        out.push_back(import_item());
        while (at_op(",")) {
            out.push_back(leaf(next()));
            if (parenthesized && at_op(")")) break;
            if (!parenthesized && at_statement_end()) break;
            out.push_back(import_item());
        }
    }

    NodePtr import_statement()
    {
        auto n = make("import_statement");
        n->children.push_back(leaf(next()));
        import_list(n->children, false);
        finish(*n);
        return n;
    }

    NodePtr import_from_statement()
    {
        auto from = leaf(next());
        NodePtr n;
        if (at_name("__future__")) {
            n = make("future_import_statement");
            n->children.push_back(std::move(from));
            n->children.push_back(leaf(next()));
        } else {
            n = make("import_from_statement");
            n->children.push_back(std::move(from));
            if (at_op(".") || at_op("...")) {
                auto prefix = make("import_prefix");
                while (at_op(".") || at_op("...")) {
                    const Token& d = next();
                    for (std::size_t i = d.begin; i < d.end; ++i) {
                        prefix->children.push_back(span_leaf(".", false, i, i + 1));
                    }
                }
                finish(*prefix);
                auto rel = make("relative_import");
                rel->children.push_back(std::move(prefix));
                if (!at_name("import")) rel->children.push_back(dotted_name());
                finish(*rel);
                n->children.push_back(std::move(rel));
            } else {
                n->children.push_back(dotted_name());
            }
        }
        n->children.push_back(leaf(expect_name("import")));
        if (at_op("*")) {
            n->children.push_back(node("wildcard_import", leaf(next())));
        } else if (at_op("(")) {
            n->children.push_back(leaf(next()));
            import_list(n->children, true);
            n->children.push_back(leaf(expect_op(")")));
        } else {
            import_list(n->children, false);
        }
        finish(*n);
        return n;
    }

    static bool is_augmented_op(const Token& t)
    {
        static constexpr std::array<std::string_view, 13> ops = {"+=", "-=", "*=", "/=", "//=", "%=", "**=",
                                                                 ">>=", "<<=", "&=", "^=", "|=", "@="};
        return t.type == TokenType::Op && std::find(ops.begin(), ops.end(), t.text) != ops.end();
    }

    NodePtr expression_statement()
    {
        auto stmt = make("expression_statement");
        if (at_name("yield")) {
            stmt->children.push_back(yield_expression());
            finish(*stmt);
            return stmt;
        }
        std::vector<NodePtr> items;
        bool trailing_comma = false;
        items.push_back(leading_element(true));
        while (at_op(",")) {
            items.push_back(leaf(next()));
            if (at_statement_end() || at_op("=") || at_op(":") || is_augmented_op(peek())) {
                trailing_comma = true;
                break;
            }
            items.push_back(star_or_named());
        }
        bool multiple = items.size() > 1 || trailing_comma;
        if (at_op("=") || at_op(":") || is_augmented_op(peek())) {
            NodePtr target;
            if (multiple) {
                for (auto& it : items) it = to_pattern(std::move(it));
                target = node_from("pattern_list", std::move(items));
            } else {
                target = to_pattern(std::move(items.front()));
            }
            stmt->children.push_back(assignment_tail(std::move(target)));
        } else {
            stmt->children = std::move(items);
        }
        finish(*stmt);
        return stmt;
    }

    NodePtr assignment_tail(NodePtr target)
    {
        if (is_augmented_op(peek())) {
            auto op = leaf(next());
            return node("augmented_assignment", std::move(target), std::move(op), right_hand_side());
        }
        auto n = make("assignment");
        n->children.push_back(std::move(target));
        if (at_op(":")) {
            n->children.push_back(leaf(next()));
            n->children.push_back(annotation());
            if (at_op("=")) {
                n->children.push_back(leaf(next()));
                n->children.push_back(right_hand_side());
            }
        } else {
            n->children.push_back(leaf(expect_op("=")));
            n->children.push_back(right_hand_side());
        }
        finish(*n);
        return n;
    }

    NodePtr right_hand_side()
    {
        NodePtr value = at_name("yield") ? yield_expression() : star_expressions(true);
        if (at_op("=") || is_augmented_op(peek())) {
            NodePtr target = value->is("expression_list") ? to_pattern_list(std::move(value)) : to_pattern(std::move(value));
            return assignment_tail(std::move(target));
        }
        return value;
    }

    NodePtr to_pattern_list(NodePtr list)
    {
        for (auto& c : list->children) {
            if (c->named) c = to_pattern(std::move(c));
        }
        list->kind = "pattern_list";
        return list;
    }

    NodePtr to_pattern(NodePtr n)
    {
        if (n->is("tuple") || n->is("list")) {
            n->kind = n->is("tuple") ? "tuple_pattern" : "list_pattern";
            for (auto& c : n->children) {
                if (c->named) c = to_pattern(std::move(c));
            }
        } else if (n->is("list_splat")) {
            n->kind = "list_splat_pattern";
        } else if (n->is("parenthesized_expression")) {
            n->kind = "tuple_pattern";
            n->children[1] = to_pattern(std::move(n->children[1]));
        }
        return n;
    }

    // ---- compound statements ---------------------------------------------------------
    NodePtr block()
    {
        auto b = make("block");
        if (at_type(TokenType::Newline)) {
            next();
            if (!at_type(TokenType::Indent)) fail("expected an indented block");
            next();
            while (!at_type(TokenType::Dedent) && !at_type(TokenType::EndMarker)) {
                if (at_type(TokenType::Newline)) {
                    next();
                    continue;
                }
                statement(b->children);
            }
            if (at_type(TokenType::Dedent)) next();
        } else {
            simple_statements(b->children);
        }
        finish(*b);
        return b;
    }

    void colon_block(SyntaxNode& n)
    {
        n.children.push_back(leaf(expect_op(":")));
        n.children.push_back(block());
    }

    NodePtr else_clause()
    {
        auto n = make("else_clause");
        n->children.push_back(leaf(next()));
        colon_block(*n);
        finish(*n);
        return n;
    }

    NodePtr if_statement()
    {
        auto n = make("if_statement");
        n->children.push_back(leaf(next()));
        n->children.push_back(named_expression_or_expression());
        colon_block(*n);
        while (at_name("elif")) {
            auto e = make("elif_clause");
            e->children.push_back(leaf(next()));
            e->children.push_back(named_expression_or_expression());
            colon_block(*e);
            finish(*e);
            n->children.push_back(std::move(e));
        }
        if (at_name("else")) n->children.push_back(else_clause());
        finish(*n);
        return n;
    }

    NodePtr while_statement()
    {
        auto n = make("while_statement");
        n->children.push_back(leaf(next()));
        n->children.push_back(named_expression_or_expression());
        colon_block(*n);
        if (at_name("else")) n->children.push_back(else_clause());
        finish(*n);
        return n;
    }

    NodePtr for_statement(NodePtr async_kw)
    {
        auto n = make("for_statement");
        if (async_kw) n->children.push_back(std::move(async_kw));
        n->children.push_back(leaf(expect_name("for")));
        n->children.push_back(target_list());
        n->children.push_back(leaf(expect_name("in")));
        n->children.push_back(star_expressions(false));
        colon_block(*n);
        if (at_name("else")) n->children.push_back(else_clause());
        finish(*n);
        return n;
    }

    NodePtr try_statement()
    {
        auto n = make("try_statement");
        n->children.push_back(leaf(next()));
        colon_block(*n);
        bool any = false;
        while (at_name("except")) {
            any = true;
            auto e = make("except_clause");
            e->children.push_back(leaf(next()));
            if (at_op("*")) e->children.push_back(leaf(next()));
            if (!at_op(":")) {
                auto value = expression();
                if (at_name("as") || at_op(",")) {
                    auto as = leaf(next());
                    auto target = node("as_pattern_target", expression());
                    value = node("as_pattern", std::move(value), std::move(as), std::move(target));
                }
                e->children.push_back(std::move(value));
            }
            colon_block(*e);
            finish(*e);
            n->children.push_back(std::move(e));
        }
        if (at_name("else")) n->children.push_back(else_clause());
        if (at_name("finally")) {
            any = true;
            auto f = make("finally_clause");
            f->children.push_back(leaf(next()));
            colon_block(*f);
            finish(*f);
            n->children.push_back(std::move(f));
        }
        if (!any) fail("expected 'except' or 'finally' block");
        finish(*n);
        return n;
    }

    NodePtr with_item()
    {
        auto value = expression();
        if (at_name("as")) {
            auto as = leaf(next());
            auto target = node("as_pattern_target", bit_or());
            value = node("as_pattern", std::move(value), std::move(as), std::move(target));
        }
        return node("with_item", std::move(value));
    }

    std::size_t matching_close(std::size_t open) const
    {
        int depth = 0;
        for (std::size_t i = open; i < toks_.size(); ++i) {
            const Token& t = toks_[i];
            if (t.type != TokenType::Op) continue;
            if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
            if (t.text == ")" || t.text == "]" || t.text == "}") {
                if (--depth == 0) return i;
            }
        }
        return toks_.size();
    }

    NodePtr with_statement(NodePtr async_kw)
    {
        auto n = make("with_statement");
        if (async_kw) n->children.push_back(std::move(async_kw));
        n->children.push_back(leaf(expect_name("with")));
        auto clause = make("with_clause");
        bool parenthesized = false;
        if (at_op("(")) {
            std::size_t close = matching_close(pos_);
            parenthesized = close + 1 < toks_.size() && toks_[close + 1].type == TokenType::Op &&
                            toks_[close + 1].text == ":";
        }
        if (parenthesized) {
            clause->children.push_back(leaf(next()));
            clause->children.push_back(with_item());
            while (at_op(",")) {
                clause->children.push_back(leaf(next()));
                if (at_op(")")) break;
                clause->children.push_back(with_item());
            }
            clause->children.push_back(leaf(expect_op(")")));
        } else {
            clause->children.push_back(with_item());
            while (at_op(",")) {
                clause->children.push_back(leaf(next()));
                clause->children.push_back(with_item());
            }
        }
        finish(*clause);
        n->children.push_back(std::move(clause));
        colon_block(*n);
        finish(*n);
        return n;
    }

    NodePtr parameter(bool typed)
    {
        if (at_op("*")) {
            auto star = leaf(next());
            if (at_op(",") || at_op(")") || at_op(":")) {
                return node("keyword_separator", std::move(star));
            }
            auto splat = node("list_splat_pattern", std::move(star), identifier());
            if (typed && at_op(":")) {
                auto colon = leaf(next());
                return node("typed_parameter", std::move(splat), std::move(colon), annotation());
            }
            return splat;
        }
        if (at_op("**")) {
            auto stars = leaf(next());
            auto splat = node("dictionary_splat_pattern", std::move(stars), identifier());
            if (typed && at_op(":")) {
                auto colon = leaf(next());
                return node("typed_parameter", std::move(splat), std::move(colon), annotation());
            }
            return splat;
        }
        if (at_op("/")) {
            return node("positional_separator", leaf(next()));
        }
        NodePtr name;
        if (at_op("(")) {
            name = to_pattern(atom());
        } else {
            name = identifier();
        }
        if (typed && at_op(":")) {
            auto colon = leaf(next());
            auto type = annotation();
            if (at_op("=")) {
                auto eq = leaf(next());
                return node("typed_default_parameter", std::move(name), std::move(colon), std::move(type),
                            std::move(eq), expression());
            }
            return node("typed_parameter", std::move(name), std::move(colon), std::move(type));
        }
        if (at_op("=")) {
            auto eq = leaf(next());
            return node("default_parameter", std::move(name), std::move(eq), expression());
        }
        return name;
    }

    NodePtr parameters()
    {
        auto n = make("parameters");
        n->children.push_back(leaf(expect_op("(")));
        while (!at_op(")")) {
            n->children.push_back(parameter(true));
            if (!at_op(",")) break;
            n->children.push_back(leaf(next()));
        }
        n->children.push_back(leaf(expect_op(")")));
        finish(*n);
        return n;
    }

    NodePtr function_definition(NodePtr async_kw)
    {
        auto n = make("function_definition");
        if (async_kw) n->children.push_back(std::move(async_kw));
        n->children.push_back(leaf(expect_name("def")));
        n->children.push_back(identifier());
        n->children.push_back(parameters());
        if (at_op("->")) {
            n->children.push_back(leaf(next()));
            n->children.push_back(annotation());
        }
        colon_block(*n);
        finish(*n);
        return n;
    }

    NodePtr class_definition()
    {
        auto n = make("class_definition");
        n->children.push_back(leaf(next()));
        n->children.push_back(identifier());
        if (at_op("(")) n->children.push_back(argument_list());
        colon_block(*n);
        finish(*n);
        return n;
    }

    NodePtr decorated_definition()
    {
        auto n = make("decorated_definition");
        while (at_op("@")) {
            auto at = leaf(next());
            n->children.push_back(node("decorator", std::move(at), named_expression_or_expression()));
            if (!at_type(TokenType::Newline)) fail("expected newline after decorator");
            next();
        }
        if (at_name("def")) {
            n->children.push_back(function_definition(nullptr));
        } else if (at_name("async") && at_name("def", 1)) {
            auto kw = leaf(next());
            n->children.push_back(function_definition(std::move(kw)));
        } else if (at_name("class")) {
            n->children.push_back(class_definition());
        } else {
            fail("expected function or class definition after decorator");
        }
        finish(*n);
        return n;
    }

    NodePtr annotation() { return node("type", to_type(expression())); }

    static bool is_type_node(const SyntaxNode& n)
    {
        return n.is("generic_type") || n.is("union_type") || n.is("constrained_type");
    }

    // Annotations reuse expression syntax, but `Name[...]` and unions involving such
    // generics get dedicated type nodes.
    NodePtr to_type(NodePtr n)
    {
        if (n->is("subscript") && n->children.front()->is("identifier")) {
            auto generic = make("generic_type");
            auto param = make("type_parameter");
            auto& kids = n->children;
            for (std::size_t i = 1; i < kids.size(); ++i) {
                if (!kids[i]->named) {
                    param->children.push_back(std::move(kids[i]));
                    continue;
                }
                auto& item = kids[i];
                if (item->is("slice") && item->children.size() == 3 && item->children[0]->named &&
                    item->children[2]->named) {
                    auto lo = node("type", to_type(std::move(item->children[0])));
                    auto hi = node("type", to_type(std::move(item->children[2])));
                    auto constrained = node("constrained_type", std::move(lo), std::move(item->children[1]), std::move(hi));
                    param->children.push_back(node("type", std::move(constrained)));
                } else {
                    param->children.push_back(node("type", to_type(std::move(item))));
                }
            }
            finish(*param);
            generic->children.push_back(std::move(kids.front()));
            generic->children.push_back(std::move(param));
            finish(*generic);
            return generic;
        }
        if (n->is("binary_operator") && n->children[1]->is("|")) {
            std::vector<NodePtr> operands;
            std::vector<NodePtr> bars;
            flatten_union(std::move(n), operands, bars);
            return union_chain(operands, bars, 0);
        }
        return n;
    }

    void flatten_union(NodePtr n, std::vector<NodePtr>& operands, std::vector<NodePtr>& bars)
    {
        if (n->is("binary_operator") && n->children[1]->is("|")) {
            flatten_union(std::move(n->children[0]), operands, bars);
            bars.push_back(std::move(n->children[1]));
            operands.push_back(std::move(n->children[2]));
            return;
        }
        operands.push_back(std::move(n));
    }

    // A union becomes a type node only when its leftmost operand is one; the remainder
    // then nests to the right. Otherwise the chain stays an ordinary expression.
    NodePtr union_chain(std::vector<NodePtr>& operands, std::vector<NodePtr>& bars, std::size_t from)
    {
        if (from + 1 == operands.size()) return to_type(std::move(operands[from]));
        auto head = operands[from]->is("subscript") && operands[from]->children.front()->is("identifier")
                        ? to_type(std::move(operands[from]))
                        : std::move(operands[from]);
        if (is_type_node(*head)) {
            auto rest = union_chain(operands, bars, from + 1);
            return node("union_type", node("type", std::move(head)), std::move(bars[from]), node("type", std::move(rest)));
        }
        NodePtr chain = std::move(head);
        for (std::size_t i = from + 1; i < operands.size(); ++i) {
            chain = node("binary_operator", std::move(chain), std::move(bars[i - 1]), std::move(operands[i]));
        }
        return chain;
    }

    // ---- targets -------------------------------------------------------------------
    NodePtr target_item()
    {
        if (at_op("*")) {
            auto star = leaf(next());
            return node("list_splat_pattern", std::move(star), bit_or());
        }
        return to_pattern(bit_or());
    }

    NodePtr target_list()
    {
        auto first = target_item();
        if (!at_op(",")) return first;
        auto list = make("pattern_list");
        list->children.push_back(std::move(first));
        while (at_op(",")) {
            list->children.push_back(leaf(next()));
            if (at_name("in") || at_op("=")) break;
            list->children.push_back(target_item());
        }
        finish(*list);
        return list;
    }

    // ---- expressions ---------------------------------------------------------------
    // A leading `*name` in a display or bare expression list binds as an atom, so trailers
    // and operators apply to the splat itself.
    bool at_splat_atom() const
    {
        return at_op("*") && at_type(TokenType::Name, 1) && !is_hard_keyword(peek(1).text);
    }

    NodePtr leading_element(bool named)
    {
        if (at_splat_atom()) {
            splat_atom_ = true;
            return named ? named_expression_or_expression() : expression();
        }
        return named ? star_or_named() : star_or_expression();
    }

    NodePtr star_or_named()
    {
        if (at_op("*")) {
            auto star = leaf(next());
            return node("list_splat", std::move(star), expression());
        }
        return named_expression_or_expression();
    }

    // Comma-separated expressions; a single item without a trailing comma is returned bare.
    NodePtr star_expressions(bool allow_named)
    {
        auto first = leading_element(allow_named);
        if (!at_op(",")) return first;
        auto list = make("expression_list");
        list->children.push_back(std::move(first));
        while (at_op(",")) {
            list->children.push_back(leaf(next()));
            if (!starts_expression()) break;
            list->children.push_back(allow_named ? star_or_named() : star_or_expression());
        }
        finish(*list);
        return list;
    }

    NodePtr star_or_expression()
    {
        if (at_op("*")) {
            auto star = leaf(next());
            return node("list_splat", std::move(star), expression());
        }
        return expression();
    }

    bool starts_expression() const
    {
        const Token& t = peek();
        switch (t.type) {
        case TokenType::Name:
            return !is_hard_keyword(t.text) || t.text == "not" || t.text == "lambda" || t.text == "await" ||
                   t.text == "None" || t.text == "True" || t.text == "False";
        case TokenType::Number:
        case TokenType::String:
            return true;
        case TokenType::Op:
            return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
                   t.text == "~" || t.text == "*" || t.text == "..." || t.text == "**";
        default:
            return false;
        }
    }

    NodePtr named_expression_or_expression()
    {
        if (at_type(TokenType::Name) && at_op(":=", 1)) {
            auto name = identifier();
            auto op = leaf(next());
            return node("named_expression", std::move(name), std::move(op), expression());
        }
        return expression();
    }

    NodePtr yield_expression()
    {
        auto n = make("yield");
        n->children.push_back(leaf(next()));
        if (at_name("from")) {
            n->children.push_back(leaf(next()));
            n->children.push_back(expression());
        } else if (starts_expression()) {
            n->children.push_back(star_expressions(false));
        }
        finish(*n);
        return n;
    }

    NodePtr expression()
    {
        if (at_name("lambda")) return lambda(true);
        auto cond = disjunction();
        if (at_name("if")) {
            auto kw_if = leaf(next());
            auto test = disjunction();
            auto kw_else = leaf(expect_name("else"));
            auto other = expression();
            return node("conditional_expression", std::move(cond), std::move(kw_if), std::move(test),
                        std::move(kw_else), std::move(other));
        }
        return cond;
    }

    NodePtr expression_without_conditional()
    {
        if (at_name("lambda")) return lambda(false);
        return disjunction();
    }

    NodePtr lambda(bool allow_conditional)
    {
        auto n = make("lambda");
        n->children.push_back(leaf(next()));
        if (!at_op(":")) {
            auto params = make("lambda_parameters");
            while (!at_op(":")) {
                params->children.push_back(parameter(false));
                if (!at_op(",")) break;
                params->children.push_back(leaf(next()));
            }
            finish(*params);
            n->children.push_back(std::move(params));
        }
        n->children.push_back(leaf(expect_op(":")));
        n->children.push_back(allow_conditional ? expression() : expression_without_conditional());
        finish(*n);
        return n;
    }

    NodePtr disjunction()
    {
        auto left = conjunction();
        while (at_name("or")) {
            auto op = leaf(next());
            left = node("boolean_operator", std::move(left), std::move(op), conjunction());
        }
        return left;
    }

    NodePtr conjunction()
    {
        auto left = inversion();
        while (at_name("and")) {
            auto op = leaf(next());
            left = node("boolean_operator", std::move(left), std::move(op), inversion());
        }
        return left;
    }

    NodePtr inversion()
    {
        if (at_name("not")) {
            auto op = leaf(next());
            return node("not_operator", std::move(op), inversion());
        }
        return comparison();
    }

    NodePtr comparison_op()
    {
        const Token& t = peek();
        if (t.type == TokenType::Op) {
            if (t.text == "<" || t.text == ">" || t.text == "==" || t.text == ">=" || t.text == "<=" ||
                t.text == "!=" || t.text == "<>") {
                return leaf(next());
            }
            return nullptr;
        }
        if (t.type != TokenType::Name) return nullptr;
        if (t.text == "in") return leaf(next());
        if (t.text == "not" && at_name("in", 1)) {
            auto a = leaf(next());
            auto b = leaf(next());
            auto n = make("not in", false);
            n->children.push_back(std::move(a));
            n->children.push_back(std::move(b));
            finish(*n);
            return n;
        }
        if (t.text == "is") {
            auto a = leaf(next());
            if (!at_name("not")) return a;
            auto b = leaf(next());
            auto n = make("is not", false);
            n->children.push_back(std::move(a));
            n->children.push_back(std::move(b));
            finish(*n);
            return n;
        }
        return nullptr;
    }

    NodePtr comparison()
    {
        auto left = bit_or();
        auto op = comparison_op();
        if (!op) return left;
        auto n = make("comparison_operator");
        n->children.push_back(std::move(left));
        while (op) {
            n->children.push_back(std::move(op));
            n->children.push_back(bit_or());
            op = comparison_op();
        }
        finish(*n);
        return n;
    }

    template <typename Next>
    NodePtr binary_level(std::initializer_list<std::string_view> ops, Next next_level)
    {
        auto left = (this->*next_level)();
        for (;;) {
            bool matched = false;
            for (auto op : ops) {
                if (at_op(op)) {
                    auto o = leaf(next());
                    left = node("binary_operator", std::move(left), std::move(o), (this->*next_level)());
                    matched = true;
                    break;
                }
            }
            if (!matched) return left;
        }
    }

    NodePtr bit_or() { return binary_level({"|"}, &Parser::bit_xor); }
    NodePtr bit_xor() { return binary_level({"^"}, &Parser::bit_and); }
    NodePtr bit_and() { return binary_level({"&"}, &Parser::shift_expr); }
    NodePtr shift_expr() { return binary_level({"<<", ">>"}, &Parser::arith); }
    NodePtr arith() { return binary_level({"+", "-"}, &Parser::term); }
    NodePtr term() { return binary_level({"*", "/", "//", "%", "@"}, &Parser::factor); }

    NodePtr factor()
    {
        if (at_op("-") || at_op("+") || at_op("~")) {
            auto op = leaf(next());
            return node("unary_operator", std::move(op), factor());
        }
        return power();
    }

    NodePtr power()
    {
        auto base = await_primary();
        if (at_op("**")) {
            auto op = leaf(next());
            return node("binary_operator", std::move(base), std::move(op), factor());
        }
        return base;
    }

    NodePtr await_primary()
    {
        if (at_name("await")) {
            auto kw = leaf(next());
            return node("await", std::move(kw), primary());
        }
        return primary();
    }

    NodePtr primary()
    {
        auto value = atom();
        for (;;) {
            if (at_op(".")) {
                auto dot = leaf(next());
                value = node("attribute", std::move(value), std::move(dot), identifier());
            } else if (at_op("(")) {
                value = call_tail(std::move(value));
            } else if (at_op("[")) {
                value = subscript_tail(std::move(value));
            } else {
                return value;
            }
        }
    }

    NodePtr argument()
    {
        if (at_op("*")) {
            auto star = leaf(next());
            return node("list_splat", std::move(star), expression());
        }
        if (at_op("**")) {
            auto stars = leaf(next());
            return node("dictionary_splat", std::move(stars), expression());
        }
        if (at_type(TokenType::Name) && at_op("=", 1)) {
            auto name = named_leaf("identifier", next());
            auto eq = leaf(next());
            return node("keyword_argument", std::move(name), std::move(eq), expression());
        }
        return named_expression_or_expression();
    }

    NodePtr argument_list()
    {
        auto n = make("argument_list");
        n->children.push_back(leaf(expect_op("(")));
        while (!at_op(")")) {
            n->children.push_back(argument());
            if (!at_op(",")) break;
            n->children.push_back(leaf(next()));
        }
        n->children.push_back(leaf(expect_op(")")));
        finish(*n);
        return n;
    }

    NodePtr call_tail(NodePtr callee)
    {
        auto open = leaf(next());
        auto args = make("argument_list");
        args->children.push_back(std::move(open));
        if (!at_op(")")) {
            auto first = argument();
            if (at_name("for") || (at_name("async") && at_name("for", 1))) {
                auto gen = make("generator_expression");
                gen->children.push_back(std::move(args->children.front()));
                gen->children.push_back(std::move(first));
                comprehension_clauses(gen->children);
                gen->children.push_back(leaf(expect_op(")")));
                finish(*gen);
                return node("call", std::move(callee), std::move(gen));
            }
            args->children.push_back(std::move(first));
            while (at_op(",")) {
                args->children.push_back(leaf(next()));
                if (at_op(")")) break;
                args->children.push_back(argument());
            }
        }
        args->children.push_back(leaf(expect_op(")")));
        finish(*args);
        return node("call", std::move(callee), std::move(args));
    }

    NodePtr subscript_item()
    {
        auto slice = make("slice");
        if (!at_op(":")) {
            auto first = at_op("*") ? star_or_expression() : named_expression_or_expression();
            if (!at_op(":")) return first;
            slice->children.push_back(std::move(first));
        }
        slice->children.push_back(leaf(next()));
        if (!at_op(":") && !at_op("]") && !at_op(",")) slice->children.push_back(expression());
        if (at_op(":")) {
            slice->children.push_back(leaf(next()));
            if (!at_op("]") && !at_op(",")) slice->children.push_back(expression());
        }
        finish(*slice);
        return slice;
    }

    NodePtr subscript_tail(NodePtr value)
    {
        auto n = make("subscript");
        n->children.push_back(std::move(value));
        n->children.push_back(leaf(next()));
        n->children.push_back(subscript_item());
        while (at_op(",")) {
            n->children.push_back(leaf(next()));
            if (at_op("]")) break;
            n->children.push_back(subscript_item());
        }
        n->children.push_back(leaf(expect_op("]")));
        finish(*n);
        return n;
    }

    void comprehension_clauses(std::vector<NodePtr>& out)
    {
        for (;;) {
            if (at_name("for") || (at_name("async") && at_name("for", 1))) {
                auto clause = make("for_in_clause");
                if (at_name("async")) clause->children.push_back(leaf(next()));
                clause->children.push_back(leaf(next()));
                clause->children.push_back(target_list());
                clause->children.push_back(leaf(expect_name("in")));
                clause->children.push_back(expression_without_conditional());
                while (at_op(",") && !at_op(")", 1) && !at_op("]", 1) && !at_op("}", 1)) {
                    clause->children.push_back(leaf(next()));
                    clause->children.push_back(expression_without_conditional());
                }
                finish(*clause);
                out.push_back(std::move(clause));
            } else if (at_name("if")) {
                auto kw = leaf(next());
                out.push_back(node("if_clause", std::move(kw), expression_without_conditional()));
            } else {
                return;
            }
        }
    }

    bool at_comprehension() const { return at_name("for") || (at_name("async") && at_name("for", 1)); }

    NodePtr collection_element(bool leading = false)
    {
        if (leading && at_splat_atom()) {
            splat_atom_ = true;
            return named_expression_or_expression();
        }
        if (at_op("*")) {
            auto star = leaf(next());
            return node("list_splat", std::move(star), bit_or());
        }
        if (at_name("yield")) return yield_expression();
        return named_expression_or_expression();
    }

    void collection_rest(SyntaxNode& n, std::string_view close)
    {
        while (at_op(",")) {
            n.children.push_back(leaf(next()));
            if (at_op(close)) break;
            n.children.push_back(collection_element());
        }
        n.children.push_back(leaf(expect_op(close)));
    }

    NodePtr parenthesized()
    {
        auto open = leaf(next());
        if (at_op(")")) {
            return node("tuple", std::move(open), leaf(next()));
        }
        if (at_name("yield")) {
            auto y = yield_expression();
            return node("parenthesized_expression", std::move(open), std::move(y), leaf(expect_op(")")));
        }
        auto first = collection_element();
        if (at_comprehension()) {
            auto gen = make("generator_expression");
            gen->children.push_back(std::move(open));
            gen->children.push_back(std::move(first));
            comprehension_clauses(gen->children);
            gen->children.push_back(leaf(expect_op(")")));
            finish(*gen);
            return gen;
        }
        if (at_op(")") && !first->is("list_splat")) {
            return node("parenthesized_expression", std::move(open), std::move(first), leaf(next()));
        }
        auto tuple = make("tuple");
        tuple->children.push_back(std::move(open));
        tuple->children.push_back(std::move(first));
        collection_rest(*tuple, ")");
        finish(*tuple);
        return tuple;
    }

    NodePtr bracketed()
    {
        auto open = leaf(next());
        if (at_op("]")) {
            return node("list", std::move(open), leaf(next()));
        }
        auto first = collection_element(true);
        if (at_comprehension()) {
            auto comp = make("list_comprehension");
            comp->children.push_back(std::move(open));
            comp->children.push_back(std::move(first));
            comprehension_clauses(comp->children);
            comp->children.push_back(leaf(expect_op("]")));
            finish(*comp);
            return comp;
        }
        auto list = make("list");
        list->children.push_back(std::move(open));
        list->children.push_back(std::move(first));
        collection_rest(*list, "]");
        finish(*list);
        return list;
    }

    NodePtr dict_entry()
    {
        if (at_op("**")) {
            auto stars = leaf(next());
            return node("dictionary_splat", std::move(stars), bit_or());
        }
        auto key = expression();
        auto colon = leaf(expect_op(":"));
        return node("pair", std::move(key), std::move(colon), expression());
    }

    NodePtr braced()
    {
        auto open = leaf(next());
        if (at_op("}")) {
            return node("dictionary", std::move(open), leaf(next()));
        }
        bool dict = at_op("**");
        NodePtr first;
        if (dict) {
            first = dict_entry();
        } else if (at_op("*")) {
            first = collection_element(true);
        } else {
            first = named_expression_or_expression();
            if (at_op(":")) {
                dict = true;
                auto colon = leaf(next());
                first = node("pair", std::move(first), std::move(colon), expression());
            }
        }
        if (at_comprehension()) {
            auto comp = make(dict ? "dictionary_comprehension" : "set_comprehension");
            comp->children.push_back(std::move(open));
            comp->children.push_back(std::move(first));
            comprehension_clauses(comp->children);
            comp->children.push_back(leaf(expect_op("}")));
            finish(*comp);
            return comp;
        }
        auto n = make(dict ? "dictionary" : "set");
        n->children.push_back(std::move(open));
        n->children.push_back(std::move(first));
        while (at_op(",")) {
            n->children.push_back(leaf(next()));
            if (at_op("}")) break;
            n->children.push_back(dict ? dict_entry() : collection_element());
        }
        n->children.push_back(leaf(expect_op("}")));
        finish(*n);
        return n;
    }

    NodePtr number(const Token& t) const
    {
        std::string_view s = t.text;
        bool is_float = false;
        if (!(s.size() > 1 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))) {
            is_float = s.find_first_of(".eE") != std::string_view::npos;
        }
        return named_leaf(is_float ? "float" : "integer", t);
    }

    NodePtr atom()
    {
        if (splat_atom_) {
            splat_atom_ = false;
            auto star = leaf(next());
            return node("list_splat", std::move(star), identifier());
        }
        const Token& t = peek();
        switch (t.type) {
        case TokenType::Name:
            if (t.text == "True") return named_leaf("true", next());
            if (t.text == "False") return named_leaf("false", next());
            if (t.text == "None") return named_leaf("none", next());
            if (is_hard_keyword(t.text)) fail("invalid syntax");
            return named_leaf("identifier", next());
        case TokenType::Number:
            return number(next());
        case TokenType::String: {
            std::vector<NodePtr> parts;
            while (at_type(TokenType::String)) parts.push_back(string_literal(next()));
            if (parts.size() == 1) return std::move(parts.front());
            return node_from("concatenated_string", std::move(parts));
        }
        case TokenType::Op:
            if (t.text == "(") return parenthesized();
            if (t.text == "[") return bracketed();
            if (t.text == "{") return braced();
            if (t.text == "...") return named_leaf("ellipsis", next());
            break;
        default:
            break;
        }
        fail("invalid syntax");
    }

    // ---- string literals -------------------------------------------------------------
    NodePtr string_literal(const Token& t);

    friend class StringBuilder;

    std::string_view src_;
    const LineIndex& lines_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    bool splat_atom_ = false;

public:
    // Used by string literal decomposition to build child nodes.
    NodePtr make_span(std::string kind, bool named, std::size_t b, std::size_t e) const
    {
        return span_leaf(std::move(kind), named, b, e);
    }
    void finish_node(SyntaxNode& n) const { finish(n); }
    const LineIndex& line_index() const { return lines_; }
    std::string_view source() const { return src_; }
};

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

class StringBuilder {
public:
    StringBuilder(const Parser& parser, const Token& token) : p_(parser), t_(token), src_(parser.source()) {}

    NodePtr build()
    {
        std::string_view text = t_.text;
        std::size_t prefix_len = 0;
        while (prefix_len < text.size() && text[prefix_len] != '\'' && text[prefix_len] != '"') ++prefix_len;
        for (std::size_t i = 0; i < prefix_len; ++i) {
            char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
            raw_ |= c == 'r';
            bytes_ |= c == 'b';
            format_ |= c == 'f';
        }
        char q = text[prefix_len];
        std::size_t quote_len = (text.size() >= prefix_len + 6 && text[prefix_len + 1] == q && text[prefix_len + 2] == q) ? 3 : 1;
        std::size_t body_begin = t_.begin + prefix_len + quote_len;
        std::size_t body_end = t_.end - quote_len;

        auto node = p_.make_span("string", true, t_.begin, t_.end);
        node->children.push_back(p_.make_span("string_start", true, t_.begin, body_begin));
        content(node->children, body_begin, body_end, q);
        node->children.push_back(p_.make_span("string_end", true, body_end, t_.end));
        return node;
    }

private:
    void flush(std::vector<NodePtr>& out)
    {
        if (content_ && content_->begin < content_->end) {
            out.push_back(std::move(content_));
        }
        content_.reset();
    }

    void touch(std::size_t at)
    {
        if (!content_) {
            content_ = p_.make_span("string_content", true, at, at);
        }
    }

    // Length of a recognized escape at `i` (pointing at the backslash); 0 if not an escape,
    // npos if the backslash is silently part of the content.
    std::size_t escape_length(std::size_t i, std::size_t end) const
    {
        if (i + 1 >= end) return 0;
        char c = src_[i + 1];
        if (c == '\n') return 2;
        if (c == '\r') return (i + 2 < end && src_[i + 2] == '\n') ? 3 : 2;
        if (c == '\\' || c == '\'' || c == '"' || c == 'a' || c == 'b' || c == 'f' || c == 'n' || c == 'r' ||
            c == 't' || c == 'v') {
            return 2;
        }
        if (c >= '0' && c <= '7') {
            std::size_t n = 1;
            while (n < 3 && i + 1 + n < end && src_[i + 1 + n] >= '0' && src_[i + 1 + n] <= '7') ++n;
            return 1 + n;
        }
        auto hex_run = [&](std::size_t count) -> std::size_t {
            for (std::size_t k = 0; k < count; ++k) {
                if (i + 2 + k >= end || !is_hex(src_[i + 2 + k])) return 0;
            }
            return 2 + count;
        };
        if (c == 'x') return hex_run(2);
        if (bytes_ && (c == 'u' || c == 'U' || c == 'N')) return std::string_view::npos;
        if (c == 'u') return hex_run(4);
        if (c == 'U') return hex_run(8);
        if (c == 'N' && i + 2 < end && src_[i + 2] == '{') {
            std::size_t k = i + 3;
            while (k < end && src_[k] != '}') ++k;
            return k < end ? k - i + 1 : 0;
        }
        return 0;
    }

    void content(std::vector<NodePtr>& out, std::size_t begin, std::size_t end, char quote)
    {
        std::size_t i = begin;
        while (i < end) {
            char c = src_[i];
            if (c == '\\' && !raw_) {
                touch(i);
                std::size_t len = escape_length(i, end);
                if (len == std::string_view::npos) {
                    i += 2;
                } else if (len == 0) {
                    content_->children.push_back(p_.make_span("\\", false, i, i + 1));
                    i += (i + 1 < end) ? 2 : 1;
                } else {
                    content_->children.push_back(p_.make_span("escape_sequence", true, i, i + len));
                    i += len;
                }
                content_->end = i;
                continue;
            }
            if (c == '\\' && raw_) {
                // An escaped backslash or quote alone does not open a content node.
                bool quiet = i + 1 < end && (src_[i + 1] == '\\' || src_[i + 1] == quote);
                if (!quiet) touch(i);
                i = std::min(end, i + 2);
                if (content_) content_->end = i;
                continue;
            }
            if (format_ && (c == '{' || c == '}')) {
                if (i + 1 < end && src_[i + 1] == c) {
                    touch(i);
                    content_->children.push_back(p_.make_span("escape_interpolation", true, i, i + 2));
                    i += 2;
                    content_->end = i;
                    continue;
                }
                if (c == '{') {
                    flush(out);
                    i = interpolation(out, i, end, quote);
                    continue;
                }
            }
            touch(i);
            ++i;
            content_->end = i;
        }
        flush(out);
    }

    // Finds the end of the expression part of a replacement field starting after '{'.
    std::size_t expression_end(std::size_t i, std::size_t end) const
    {
        int depth = 0;
        while (i < end) {
            char c = src_[i];
            if (c == '\'' || c == '"') {
                // nested literal
                char q = c;
                bool triple = i + 2 < end && src_[i + 1] == q && src_[i + 2] == q;
                std::size_t k = i + (triple ? 3 : 1);
                while (k < end) {
                    if (src_[k] == '\\') {
                        k += 2;
                        continue;
                    }
                    if (src_[k] == q && (!triple || (k + 2 < end && src_[k + 1] == q && src_[k + 2] == q))) {
                        k += triple ? 3 : 1;
                        break;
                    }
                    ++k;
                }
                i = k;
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                ++depth;
            } else if (c == ')' || c == ']' || (c == '}' && depth > 0)) {
                --depth;
            } else if (depth == 0) {
                if (c == '}' || c == ':') return i;
                if (c == '!' && !(i + 1 < end && src_[i + 1] == '=')) return i;
                if (c == '=') {
                    char prev = i > 0 ? src_[i - 1] : '\0';
                    bool compound = (i + 1 < end && src_[i + 1] == '=') || prev == '=' || prev == '!' ||
                                    prev == '<' || prev == '>';
                    if (!compound) {
                        std::size_t k = i + 1;
                        while (k < end && (src_[k] == ' ' || src_[k] == '\t')) ++k;
                        if (k < end && (src_[k] == '}' || src_[k] == '!' || src_[k] == ':')) return i;
                    }
                }
            }
            ++i;
        }
        return end;
    }

    NodePtr parse_expression(std::size_t b, std::size_t e) const
    {
        auto tokens = tokenize_fragment(src_, b, e, p_.line_index().at(b));
        std::vector<Token> with_end = std::move(tokens);
        with_end.push_back(Token{TokenType::EndMarker, e, e, p_.line_index().at(e), {}});
        Parser sub(src_, p_.line_index(), std::move(with_end));
        return sub.replacement_expression();
    }

    std::size_t interpolation(std::vector<NodePtr>& out, std::size_t open, std::size_t end, char quote)
    {
        auto node = p_.make_span("interpolation", true, open, open + 1);
        node->children.push_back(p_.make_span("{", false, open, open + 1));
        std::size_t expr_end = expression_end(open + 1, end);
        node->children.push_back(parse_expression(open + 1, expr_end));
        std::size_t i = expr_end;
        auto skip_ws = [&] {
            while (i < end && (src_[i] == ' ' || src_[i] == '\t' || src_[i] == '\n')) ++i;
        };
        if (i < end && src_[i] == '=') {
            node->children.push_back(p_.make_span("=", false, i, i + 1));
            ++i;
            skip_ws();
        }
        if (i < end && src_[i] == '!') {
            std::size_t k = i + 1;
            while (k < end && std::isalpha(static_cast<unsigned char>(src_[k])) != 0) ++k;
            node->children.push_back(p_.make_span("type_conversion", true, i, k));
            i = k;
        }
        if (i < end && src_[i] == ':') {
            auto spec = p_.make_span("format_specifier", true, i, i + 1);
            spec->children.push_back(p_.make_span(":", false, i, i + 1));
            ++i;
            while (i < end && src_[i] != '}') {
                if (src_[i] == '{') {
                    auto fe = p_.make_span("format_expression", true, i, i + 1);
                    fe->children.push_back(p_.make_span("{", false, i, i + 1));
                    std::size_t ee = expression_end(i + 1, end);
                    fe->children.push_back(parse_expression(i + 1, ee));
                    i = ee;
                    if (i < end && src_[i] == '}') {
                        fe->children.push_back(p_.make_span("}", false, i, i + 1));
                        ++i;
                    }
                    p_.finish_node(*fe);
                    spec->children.push_back(std::move(fe));
                    continue;
                }
                ++i;
            }
            p_.finish_node(*spec);
            spec->end = i;
            node->children.push_back(std::move(spec));
        }
        if (i >= end || src_[i] != '}') {
            throw SyntaxError("f-string: expecting '}'", p_.line_index().at(open));
        }
        node->children.push_back(p_.make_span("}", false, i, i + 1));
        p_.finish_node(*node);
        out.push_back(std::move(node));
        (void)quote;
        return i + 1;
    }

    const Parser& p_;
    const Token& t_;
    std::string_view src_;
    bool raw_ = false;
    bool bytes_ = false;
    bool format_ = false;
    NodePtr content_;
};

NodePtr Parser::string_literal(const Token& t)
{
    return StringBuilder(*this, t).build();
}

}  // namespace

SyntaxTree parse_module(std::string source)
{
    auto tokens = tokenize(source);
    LineIndex lines(source);
    Parser parser(source, lines, std::move(tokens));
    auto root = parser.module();
    return SyntaxTree(std::move(source), std::move(root));
}

bool parses(std::string_view source)
{
    try {
        (void)parse_module(std::string(source));
        return true;
    } catch (const SyntaxError&) {
        return false;
    }
}

}  // namespace codebench::python

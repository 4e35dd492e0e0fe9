#include "codebench/python/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace codebench::python {

std::string_view to_string(TokenType type)
{
    switch (type) {
    case TokenType::Name: return "NAME";
    case TokenType::Number: return "NUMBER";
    case TokenType::String: return "STRING";
    case TokenType::Op: return "OP";
    case TokenType::Newline: return "NEWLINE";
    case TokenType::Nl: return "NL";
    case TokenType::Comment: return "COMMENT";
    case TokenType::Indent: return "INDENT";
    case TokenType::Dedent: return "DEDENT";
    case TokenType::EndMarker: return "ENDMARKER";
    case TokenType::ErrorToken: return "ERRORTOKEN";
    }
    return "?";
}

SyntaxError::SyntaxError(const std::string& message, SourceLocation location)
    : std::runtime_error(message + " (line " + std::to_string(location.line) + ", column " +
                         std::to_string(location.column) + ")"),
      location_(location)
{
}

namespace {

bool is_word_byte(unsigned char c)
{
    return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Operators sorted so that longer spellings are tried first.
constexpr std::array<std::string_view, 49> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "!=", "%=", "&=", "**", "*=", "+=", "-=", "->",
    "//",  "/=",  ":=",  "<<",  "<=",  "==", ">=", ">>", "@=", "^=", "|=", "%",  "&",
    "(",   ")",   "*",   "+",   ",",   "-",  ".",  "/",  ":",  ";",  "<",  "=",  ">",
    "@",   "[",   "]",   "^",   "{",   "|",  "}",  "~",  "!",  "`",
};

std::size_t match_operator(std::string_view rest)
{
    for (auto op : kOperators) {
        if (op == "!" || op == "`") {
            continue;  // not operators in Python 3
        }
        if (rest.substr(0, op.size()) == op) {
            return op.size();
        }
    }
    return 0;
}

// The helpers below emulate the alternation order of the reference tokenizer's number regex:
// imaginary, then float, then integer; the first alternative that matches wins.
class NumberScanner {
public:
    explicit NumberScanner(std::string_view text) : text_(text) {}

    std::size_t match() const
    {
        if (auto n = imag(); n != 0) return n;
        if (auto n = floatnumber(); n != 0) return n;
        return intnumber();
    }

private:
    char at(std::size_t i) const { return i < text_.size() ? text_[i] : '\0'; }

    template <typename Pred>
    std::size_t run(std::size_t pos, Pred pred) const
    {
        // pred(?:_?pred)* starting at pos; returns end or npos if the first char fails.
        if (!pred(at(pos))) return std::string_view::npos;
        std::size_t i = pos + 1;
        for (;;) {
            if (pred(at(i))) {
                ++i;
            } else if (at(i) == '_' && pred(at(i + 1))) {
                i += 2;
            } else {
                return i;
            }
        }
    }

    std::size_t digitpart(std::size_t pos) const { return run(pos, is_digit); }

    std::size_t exponent(std::size_t pos) const
    {
        if (at(pos) != 'e' && at(pos) != 'E') return std::string_view::npos;
        std::size_t i = pos + 1;
        if (at(i) == '+' || at(i) == '-') ++i;
        return digitpart(i);
    }

    std::size_t pointfloat() const
    {
        std::size_t end = std::string_view::npos;
        if (auto d = digitpart(0); d != std::string_view::npos && at(d) == '.') {
            end = d + 1;
            if (auto f = digitpart(end); f != std::string_view::npos) end = f;
        } else if (at(0) == '.') {
            if (auto f = digitpart(1); f != std::string_view::npos) end = f;
        }
        if (end == std::string_view::npos) return 0;
        if (auto e = exponent(end); e != std::string_view::npos) end = e;
        return end;
    }

    std::size_t expfloat() const
    {
        auto d = digitpart(0);
        if (d == std::string_view::npos) return 0;
        auto e = exponent(d);
        return e == std::string_view::npos ? 0 : e;
    }

    std::size_t floatnumber() const
    {
        if (auto n = pointfloat(); n != 0) return n;
        return expfloat();
    }

    std::size_t imag() const
    {
        if (auto d = digitpart(0); d != std::string_view::npos && (at(d) == 'j' || at(d) == 'J')) {
            return d + 1;
        }
        if (auto f = floatnumber(); f != 0 && (at(f) == 'j' || at(f) == 'J')) {
            return f + 1;
        }
        return 0;
    }

    std::size_t radix(char lower, bool (*pred)(char)) const
    {
        if (at(0) != '0' || (at(1) != lower && at(1) != static_cast<char>(lower - 32))) return 0;
        std::size_t i = 2;
        bool any = false;
        for (;;) {
            if (pred(at(i))) {
                ++i;
                any = true;
            } else if (at(i) == '_' && pred(at(i + 1))) {
                i += 2;
                any = true;
            } else {
                break;
            }
        }
        return any ? i : 0;
    }

    std::size_t intnumber() const
    {
        if (auto n = radix('x', [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }); n)
            return n;
        if (auto n = radix('b', [](char c) { return c == '0' || c == '1'; }); n) return n;
        if (auto n = radix('o', [](char c) { return c >= '0' && c <= '7'; }); n) return n;
        if (at(0) == '0') {
            return run(0, [](char c) { return c == '0'; });
        }
        if (at(0) >= '1' && at(0) <= '9') {
            return digitpart(0);
        }
        return 0;
    }

    std::string_view text_;
};

class Lexer {
public:
    Lexer(std::string_view source, std::size_t begin, std::size_t end, bool fragment, SourceLocation start)
        : src_(source), pos_(begin), end_(end), fragment_(fragment), line_(start.line),
          line_start_(begin - std::min(begin, start.column))
    {
        if (fragment_) {
            paren_depth_ = 1;
        }
    }

    std::vector<Token> run()
    {
        at_line_start_ = !fragment_;
        while (pos_ < end_) {
            if (at_line_start_) {
                at_line_start_ = false;
                if (paren_depth_ == 0 && !continued_) {
                    if (!handle_indentation()) {
                        continue;
                    }
                } else {
                    continued_ = false;
                }
            }
            scan_token();
        }
        finish();
        return std::move(tokens_);
    }

private:
    SourceLocation loc(std::size_t offset) const { return {line_, offset - line_start_}; }

    void emit(TokenType type, std::size_t b, std::size_t e, SourceLocation where)
    {
        tokens_.push_back(Token{type, b, e, where, src_.substr(b, e - b)});
    }

    void emit(TokenType type, std::size_t b, std::size_t e) { emit(type, b, e, loc(b)); }

    void new_line(std::size_t next_line_start)
    {
        ++line_;
        line_start_ = next_line_start;
        at_line_start_ = true;
    }

    std::size_t line_end_from(std::size_t p) const
    {
        while (p < end_ && src_[p] != '\n') ++p;
        return p;
    }

    // Returns false when the whole line was consumed (blank or comment-only).
    bool handle_indentation()
    {
        std::size_t column = 0;
        std::size_t p = pos_;
        while (p < end_) {
            char c = src_[p];
            if (c == ' ') {
                ++column;
            } else if (c == '\t') {
                column = (column / 8 + 1) * 8;
            } else if (c == '\f') {
                column = 0;
            } else {
                break;
            }
            ++p;
        }
        if (p >= end_) {
            pos_ = p;
            return false;
        }
        char c = src_[p];
        if (c == '#' || c == '\r' || c == '\n') {
            if (c == '#') {
                std::size_t e = line_end_from(p);
                std::size_t ce = e;
                if (ce > p && src_[ce - 1] == '\r') --ce;
                emit(TokenType::Comment, p, ce);
                p = ce;
            }
            std::size_t e = line_end_from(p);
            std::size_t after = e < end_ ? e + 1 : e;
            emit(TokenType::Nl, p, after);
            pos_ = after;
            if (e < end_) new_line(after);
            return false;
        }
        if (column > indents_.back()) {
            indents_.push_back(column);
            emit(TokenType::Indent, pos_, p, loc(pos_));
        }
        while (column < indents_.back()) {
            if (std::find(indents_.begin(), indents_.end(), column) == indents_.end()) {
                throw SyntaxError("unindent does not match any outer indentation level", loc(p));
            }
            indents_.pop_back();
            emit(TokenType::Dedent, p, p);
        }
        pos_ = p;
        return true;
    }

    std::size_t string_prefix_length(std::size_t p) const
    {
        for (std::size_t n = 0; n <= 2 && p + n < end_; ++n) {
            char c = src_[p + n];
            if (c == '\'' || c == '"') {
                return is_string_prefix(src_.substr(p, n)) ? n : std::string_view::npos;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) == 0) {
                return std::string_view::npos;
            }
        }
        return std::string_view::npos;
    }

    void scan_string(std::size_t start, std::size_t quote_pos)
    {
        char q = src_[quote_pos];
        bool triple = quote_pos + 2 < end_ && src_[quote_pos + 1] == q && src_[quote_pos + 2] == q;
        SourceLocation where = loc(start);
        std::size_t p = quote_pos + (triple ? 3 : 1);
        while (p < end_) {
            char c = src_[p];
            if (c == '\\') {
                if (p + 1 < end_ && src_[p + 1] == '\n') {
                    new_line(p + 2);
                    at_line_start_ = false;
                } else if (p + 2 < end_ && src_[p + 1] == '\r' && src_[p + 2] == '\n') {
                    new_line(p + 3);
                    at_line_start_ = false;
                    ++p;
                }
                p += 2;
                continue;
            }
            if (c == '\n') {
                if (!triple) {
                    break;
                }
                new_line(p + 1);
                at_line_start_ = false;
                ++p;
                continue;
            }
            if (c == q) {
                if (!triple) {
                    emit(TokenType::String, start, p + 1, where);
                    pos_ = p + 1;
                    return;
                }
                if (p + 2 < end_ && src_[p + 1] == q && src_[p + 2] == q) {
                    emit(TokenType::String, start, p + 3, where);
                    pos_ = p + 3;
                    return;
                }
            }
            ++p;
        }
        if (triple) {
            throw SyntaxError("EOF in multi-line string", where);
        }
        // Unterminated single-quoted string: the reference tokenizer reports the quote as an
        // error token and resumes after it.
        if (quote_pos > start) {
            emit(TokenType::Name, start, quote_pos, where);
        }
        emit(TokenType::ErrorToken, quote_pos, quote_pos + 1, loc(quote_pos));
        pos_ = quote_pos + 1;
    }

    void scan_token()
    {
        // whitespace
        while (pos_ < end_ && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\f')) ++pos_;
        if (pos_ >= end_) return;
        std::size_t p = pos_;
        char c = src_[p];
        auto uc = static_cast<unsigned char>(c);

        if (c == '\r' && p + 1 < end_ && src_[p + 1] == '\n') {
            emit(paren_depth_ > 0 ? TokenType::Nl : TokenType::Newline, p, p + 2);
            pos_ = p + 2;
            new_line(pos_);
            if (fragment_) at_line_start_ = false;
            return;
        }
        if (c == '\n') {
            emit(paren_depth_ > 0 ? TokenType::Nl : TokenType::Newline, p, p + 1);
            pos_ = p + 1;
            new_line(pos_);
            if (fragment_) at_line_start_ = false;
            return;
        }
        if (c == '#') {
            std::size_t e = line_end_from(p);
            if (e > p && src_[e - 1] == '\r') --e;
            emit(TokenType::Comment, p, e);
            pos_ = e;
            return;
        }
        if (c == '\\') {
            std::size_t n = p + 1;
            if (n < end_ && src_[n] == '\r') ++n;
            if (n < end_ && src_[n] == '\n') {
                continued_ = true;
                pos_ = n + 1;
                new_line(pos_);
                return;
            }
            if (n >= end_) {
                pos_ = n;
                return;
            }
            emit(TokenType::ErrorToken, p, p + 1);
            pos_ = p + 1;
            return;
        }
        if (is_digit(c) || (c == '.' && p + 1 < end_ && is_digit(src_[p + 1]))) {
            std::size_t n = NumberScanner(src_.substr(p, end_ - p)).match();
            if (n > 0) {
                emit(TokenType::Number, p, p + n);
                pos_ = p + n;
                return;
            }
        }
        if (c == '\'' || c == '"') {
            scan_string(p, p);
            return;
        }
        if (is_word_byte(uc)) {
            if (auto plen = string_prefix_length(p); plen != std::string_view::npos) {
                scan_string(p, p + plen);
                return;
            }
            std::size_t e = p;
            while (e < end_ && is_word_byte(static_cast<unsigned char>(src_[e]))) ++e;
            emit(TokenType::Name, p, e);
            pos_ = e;
            return;
        }
        if (auto n = match_operator(src_.substr(p, end_ - p)); n > 0) {
            if (c == '(' || c == '[' || c == '{') {
                ++paren_depth_;
            } else if (c == ')' || c == ']' || c == '}') {
                if (paren_depth_ > 0) --paren_depth_;
            }
            emit(TokenType::Op, p, p + n);
            pos_ = p + n;
            return;
        }
        emit(TokenType::ErrorToken, p, p + 1);
        pos_ = p + 1;
    }

    void finish()
    {
        if (fragment_) {
            return;
        }
        // A final NEWLINE is synthesized when the last logical line was not terminated.
        bool need_newline = false;
        for (auto it = tokens_.rbegin(); it != tokens_.rend(); ++it) {
            if (it->type == TokenType::Comment || it->type == TokenType::Nl) {
                if (it->type == TokenType::Nl) break;
                continue;
            }
            need_newline = it->type != TokenType::Newline && it->type != TokenType::Dedent &&
                           it->type != TokenType::Indent;
            break;
        }
        if (need_newline) {
            emit(TokenType::Newline, end_, end_);
        }
        while (indents_.size() > 1) {
            indents_.pop_back();
            emit(TokenType::Dedent, end_, end_);
        }
        emit(TokenType::EndMarker, end_, end_);
    }

    std::string_view src_;
    std::size_t pos_;
    std::size_t end_;
    bool fragment_;
    std::size_t line_;
    std::size_t line_start_;
    bool at_line_start_ = true;
    bool continued_ = false;
    int paren_depth_ = 0;
    std::vector<std::size_t> indents_{0};
    std::vector<Token> tokens_;
};

bool is_counted(TokenType t)
{
    return t == TokenType::Name || t == TokenType::Number || t == TokenType::String || t == TokenType::Op ||
           t == TokenType::ErrorToken;
}

}  // namespace

bool is_string_prefix(std::string_view prefix)
{
    std::string lower;
    for (char c : prefix) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    static constexpr std::array<std::string_view, 9> valid = {"", "r", "u", "f", "b", "br", "rb", "fr", "rf"};
    return std::find(valid.begin(), valid.end(), lower) != valid.end();
}

std::vector<Token> tokenize(std::string_view source)
{
    return Lexer(source, 0, source.size(), false, SourceLocation{1, 0}).run();
}

std::vector<Token> tokenize_fragment(std::string_view source, std::size_t begin, std::size_t end,
                                     SourceLocation start_location)
{
    return Lexer(source, begin, end, true, start_location).run();
}

std::size_t count_code_tokens(std::string_view source)
{
    auto tokens = tokenize(source);
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return is_counted(t.type); }));
}

std::vector<std::string> code_token_texts(std::string_view source)
{
    std::vector<std::string> out;
    for (const auto& t : tokenize(source)) {
        if (is_counted(t.type)) out.emplace_back(t.text);
    }
    return out;
}

}  // namespace codebench::python

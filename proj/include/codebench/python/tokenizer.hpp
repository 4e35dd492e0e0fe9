#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codebench::python {

/// Lexical categories, mirroring the token classes of the reference Python tokenizer.
enum class TokenType : std::uint8_t {
    Name,
    Number,
    String,
    Op,
    Newline,
    Nl,
    Comment,
    Indent,
    Dedent,
    EndMarker,
    ErrorToken,
};

std::string_view to_string(TokenType type);

struct SourceLocation {
    std::size_t line = 1;  // 1-based
    std::size_t column = 0;  // 0-based byte column
};

struct Token {
    TokenType type = TokenType::ErrorToken;
    std::size_t begin = 0;  // byte offsets into the tokenized source
    std::size_t end = 0;
    SourceLocation location;
    std::string_view text;
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(const std::string& message, SourceLocation location);

    [[nodiscard]] const SourceLocation& location() const noexcept { return location_; }

private:
    SourceLocation location_;
};

/// Tokenizes a whole module. The returned tokens reference `source`, which must outlive them.
/// Throws SyntaxError on unterminated strings or inconsistent dedents.
std::vector<Token> tokenize(std::string_view source);

/// Tokenizes a bracketed fragment (used for f-string replacement fields). Line breaks become
/// Nl tokens and no indentation tokens are produced. Offsets are absolute within `source`.
std::vector<Token> tokenize_fragment(std::string_view source, std::size_t begin, std::size_t end,
                                     SourceLocation start_location);

/// Number of "code tokens": names, numbers, strings, operators and error tokens. Comments,
/// line breaks, indentation and the end marker are not counted.
std::size_t count_code_tokens(std::string_view source);

/// The code tokens themselves, as text, in source order.
std::vector<std::string> code_token_texts(std::string_view source);

bool is_string_prefix(std::string_view prefix);

}  // namespace codebench::python

#pragma once

#include "codebench/pipeline/example.hpp"

#include <string>
#include <string_view>
#include <unordered_set>

namespace codebench::eval {

/// Generation prompt: boilerplate line naming the target, then the context in a python fence
/// with the slot replaced by the header, the instruction as docstring, and `...` as body.
/// Degraded examples carry their original docstring instead. Tests are never included.
std::string build_prompt(const pipeline::EvalExample& example);

/// The slot filler used by build_prompt, at the slot's indentation.
std::string render_stub(const pipeline::EvalExample& example, const std::string& indent);

/// Detects and removes test-code fragments from text shown to a generator or a study
/// participant. A fragment is any `window`-character substring of a test set that is not all
/// whitespace and does not already occur in the public material (the round-0 prompt).
class TestLeakGuard {
public:
    explicit TestLeakGuard(const pipeline::EvalExample& example, std::size_t window = 20);
    TestLeakGuard(const std::vector<std::string>& secrets, std::string_view public_text, std::size_t window = 20);

    [[nodiscard]] bool leaks(std::string_view text) const;
    /// Replaces every line touched by a leaking fragment with a placeholder line.
    [[nodiscard]] std::string redact(std::string_view text) const;
    [[nodiscard]] std::size_t window() const { return window_; }

private:
    std::size_t window_;
    std::unordered_set<std::string_view> fragments_;
    std::vector<std::string> storage_;
};

inline constexpr std::string_view redacted_line = "[line withheld]";

}  // namespace codebench::eval

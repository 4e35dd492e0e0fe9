#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace codebench::pipeline {

inline constexpr std::string_view slot_begin_marker = "# <codebench:target>";
inline constexpr std::string_view slot_end_marker = "# </codebench:target>";

struct SlotSplit {
    std::string context;         // program with the target function replaced by the two markers
    std::string target;          // the `def` (no decorators) with its own indentation removed
    std::string header;          // `def name(params) -> ann:` with the same indentation removed
    std::string qualified_name;  // Class.name for methods
};

/// Locates the first `def function_name` (pre-order) and cuts it out of program.
/// Returns nullopt when there is no such function. Throws python::SyntaxError when program
/// does not parse.
std::optional<SlotSplit> split_target(const std::string& program, const std::string& function_name);

/// Replaces the slot in context by function_code re-indented to the slot's indentation.
/// Throws std::invalid_argument when the markers are missing.
std::string assemble(const std::string& context, const std::string& function_code);

/// Replaces the slot with arbitrary text that is already indented as desired.
std::string replace_slot(const std::string& context, const std::string& replacement);

/// Indentation of the slot markers.
std::string slot_indent(const std::string& context);

/// Turns a generator completion into a dedented function definition: the first `def
/// function_name` found in it, or, when it has none, the completion treated as a body under
/// header.
std::string normalize_completion(const std::string& completion, const std::string& function_name,
                                 const std::string& header);

/// Token-level equality of two programs (whitespace-only line differences are ignored).
bool same_code(const std::string& a, const std::string& b);

}  // namespace codebench::pipeline

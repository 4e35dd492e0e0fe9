#pragma once

#include "codebench/corpus/corpus.hpp"
#include "codebench/pipeline/example.hpp"
#include "codebench/pipeline/slots.hpp"

#include <optional>
#include <string>
#include <vector>

namespace codebench::pipeline {

struct ValidationConfig {
    double min_target_bleu = 0.25;
    std::size_t min_context_tokens = 30;
};

struct SandboxVerdict {
    bool accepted = false;
    std::string reason;  // unparsable, target_missing, target_not_spliceable, target_dissimilar, context_too_short
    std::optional<SlotSplit> split;
    double similarity = 0.0;
    std::size_t context_tokens = 0;
};

SandboxVerdict validate_sandbox(const std::string& candidate, const corpus::SourceFragment& frag,
                                const ValidationConfig& config);

/// Code-token BLEU of the candidate target body against the fragment body (0 when either
/// side fails to tokenize or the reference is empty).
double target_similarity(const std::string& target_def, const std::string& header, const std::string& reference_body);

struct TestCheck {
    bool ok = false;
    std::string reason;  // tests_unparsable, too_few_asserts, target_redefined, target_not_called
    std::size_t asserts = 0;
};

inline constexpr std::size_t min_asserts = 3;

/// Static check of a test set: at least three assert statements and a call chain from
/// module-level code or a test* function down to a call of function_name.
TestCheck check_test_set(const std::string& tests, const std::string& function_name);

/// PyPI requirements of a program: its non-standard top-level imports (mapped through the
/// known import-name aliases) plus `# requires: pkg==ver` pins. First pin wins; sorted.
std::vector<std::string> derive_dependencies(const std::string& program);

/// Distribution name for an import name (`sklearn` -> `scikit-learn`); identity otherwise.
std::string distribution_for_module(const std::string& module);

/// Reads "Functionality:", "Inputs:", "Outputs:" labelled fields (case-insensitive, each
/// running until the next label). Missing fields stay empty.
Instruction parse_instruction(const std::string& text);

/// Instruction built from a docstring when generation failed twice.
Instruction fallback_instruction(const std::string& docstring, const std::string& function_name);

/// Docstring of the first function in `function_code`, cleaned like inspect.cleandoc.
std::string function_docstring(const std::string& function_code);

}  // namespace codebench::pipeline

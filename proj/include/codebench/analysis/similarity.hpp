#pragma once

#include <set>
#include <string>
#include <vector>

namespace codebench::analysis {

/// Sentence BLEU with 4-gram uniform weights, brevity penalty, and add-one smoothing applied
/// to higher-order precisions whose match count is zero. Throws std::invalid_argument when
/// `reference` is empty.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

/// BLEU over Python code tokens of the two sources.
double code_bleu(const std::string& candidate_code, const std::string& reference_code);

/// |a ∩ b| / |a ∪ b|, with 1.0 when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

}  // namespace codebench::analysis

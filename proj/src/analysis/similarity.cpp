#include "codebench/analysis/similarity.hpp"

#include "codebench/python/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace codebench::analysis {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n)
{
    std::map<Ngram, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

}  // namespace

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference)
{
    if (reference.empty()) throw std::invalid_argument("bleu: empty reference");
    if (candidate.empty()) return 0.0;

    constexpr std::size_t kOrder = 4;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= kOrder; ++n) {
        auto cand = ngram_counts(candidate, n);
        auto ref = ngram_counts(reference, n);
        std::size_t matches = 0;
        std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
        for (const auto& [gram, count] : cand) {
            auto it = ref.find(gram);
            if (it != ref.end()) matches += std::min(count, it->second);
        }
        double precision;
        if (matches > 0) {
            precision = static_cast<double>(matches) / static_cast<double>(total);
        } else if (n == 1) {
            return 0.0;
        } else {
            precision = 1.0 / static_cast<double>(total + 1);
        }
        log_sum += std::log(precision) / static_cast<double>(kOrder);
    }
    double c = static_cast<double>(candidate.size());
    double r = static_cast<double>(reference.size());
    double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum);
}

double code_bleu(const std::string& candidate_code, const std::string& reference_code)
{
    return bleu(python::code_token_texts(candidate_code), python::code_token_texts(reference_code));
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace codebench::analysis

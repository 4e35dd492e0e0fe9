#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <vector>

namespace codebench::analysis {

using Rational = boost::multiprecision::cpp_rational;

/// Unbiased pass@k estimate 1 - C(n-c, k) / C(n, k), evaluated as a running product.
/// Throws std::invalid_argument unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(std::size_t n, std::size_t c, std::size_t k);

/// The same estimate in exact rational arithmetic.
Rational pass_at_k_exact(std::size_t n, std::size_t c, std::size_t k);

struct SampleCount {
    std::size_t n = 0;
    std::size_t c = 0;
};

/// Dataset-level score: mean of per-example estimates.
double mean_pass_at_k(const std::vector<SampleCount>& examples, std::size_t k);

}  // namespace codebench::analysis

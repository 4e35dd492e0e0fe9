#include "codebench/analysis/pass_at_k.hpp"

#include <stdexcept>
#include <string>

namespace codebench::analysis {

namespace {

void check(std::size_t n, std::size_t c, std::size_t k)
{
    if (c > n) throw std::invalid_argument("pass@k: c=" + std::to_string(c) + " exceeds n=" + std::to_string(n));
    if (k < 1 || k > n) {
        throw std::invalid_argument("pass@k: k=" + std::to_string(k) + " outside [1, n=" + std::to_string(n) + "]");
    }
}

}  // namespace

double pass_at_k(std::size_t n, std::size_t c, std::size_t k)
{
    check(n, c, k);
    if (n - c < k) return 1.0;
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
    double miss = 1.0;
    for (std::size_t i = n - c + 1; i <= n; ++i) {
        miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    }
    return 1.0 - miss;
}

Rational pass_at_k_exact(std::size_t n, std::size_t c, std::size_t k)
{
    check(n, c, k);
    if (n - c < k) return Rational(1);
    Rational miss(1);
    for (std::size_t i = n - c + 1; i <= n; ++i) {
        miss *= Rational(static_cast<long long>(i - k), static_cast<long long>(i));
    }
    return Rational(1) - miss;
}

double mean_pass_at_k(const std::vector<SampleCount>& examples, std::size_t k)
{
    if (examples.empty()) throw std::invalid_argument("pass@k: no examples");
    double sum = 0.0;
    for (const auto& e : examples) sum += pass_at_k(e.n, e.c, k);
    return sum / static_cast<double>(examples.size());
}

}  // namespace codebench::analysis

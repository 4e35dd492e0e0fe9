#include "codebench/analysis/breakdown.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <stdexcept>

namespace codebench::analysis {

std::string_view to_string(Factor f)
{
    switch (f) {
    case Factor::target_length: return "target_length";
    case Factor::context_length: return "context_length";
    case Factor::function_calls: return "function_calls";
    case Factor::import_class: return "import_class";
    }
    return "unknown";
}

std::optional<Factor> parse_factor(std::string_view name)
{
    for (Factor f : {Factor::target_length, Factor::context_length, Factor::function_calls, Factor::import_class}) {
        if (to_string(f) == name) return f;
    }
    return std::nullopt;
}

std::string_view to_string(ImportClass c)
{
    switch (c) {
    case ImportClass::none: return "none";
    case ImportClass::standard: return "standard";
    case ImportClass::external: return "external";
    }
    return "unknown";
}

namespace {

void sort_points(std::vector<BreakdownPoint>& points)
{
    std::sort(points.begin(), points.end(), [](const BreakdownPoint& a, const BreakdownPoint& b) {
        if (a.factor != b.factor) return a.factor < b.factor;
        return a.id < b.id;
    });
}

Bin make_bin(std::vector<BreakdownPoint>::const_iterator first, std::vector<BreakdownPoint>::const_iterator last)
{
    Bin bin;
    bin.low = first->factor;
    bin.high = std::prev(last)->factor;
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
        bin.ids.push_back(it->id);
        sum += it->score;
    }
    bin.mean = sum / static_cast<double>(bin.ids.size());
    bin.label = fmt::format("[{:g}, {:g}]", bin.low, bin.high);
    return bin;
}

}  // namespace

std::vector<Bin> quantile_breakdown(std::vector<BreakdownPoint> points, std::size_t bins)
{
    if (bins == 0) throw std::invalid_argument("breakdown: zero bins");
    if (points.size() < bins) {
        throw std::invalid_argument(fmt::format("breakdown: need at least {} examples, got {}", bins, points.size()));
    }
    sort_points(points);
    std::vector<Bin> out;
    std::size_t base = points.size() / bins;
    std::size_t extra = points.size() % bins;
    auto it = points.cbegin();
    for (std::size_t b = 0; b < bins; ++b) {
        std::size_t size = base + (b < extra ? 1 : 0);
        out.push_back(make_bin(it, it + static_cast<std::ptrdiff_t>(size)));
        it += static_cast<std::ptrdiff_t>(size);
    }
    return out;
}

std::vector<Bin> categorical_breakdown(std::vector<BreakdownPoint> points)
{
    if (points.empty()) throw std::invalid_argument("breakdown: no examples");
    sort_points(points);
    std::vector<Bin> out;
    auto it = points.cbegin();
    while (it != points.cend()) {
        auto end = std::find_if(it, points.cend(), [&](const BreakdownPoint& p) { return p.factor != it->factor; });
        out.push_back(make_bin(it, end));
        it = end;
    }
    return out;
}

std::vector<Bin> breakdown(Factor factor, std::vector<BreakdownPoint> points)
{
    if (factor != Factor::import_class) return quantile_breakdown(std::move(points));
    if (points.size() < 5) throw std::invalid_argument("breakdown: need at least 5 examples");
    auto bins = categorical_breakdown(std::move(points));
    for (auto& b : bins) b.label = std::string(to_string(static_cast<ImportClass>(static_cast<int>(b.low))));
    return bins;
}

}  // namespace codebench::analysis

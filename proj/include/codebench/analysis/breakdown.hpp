#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codebench::analysis {

enum class Factor { target_length, context_length, function_calls, import_class };

std::string_view to_string(Factor f);
std::optional<Factor> parse_factor(std::string_view name);

/// Import classes used by the import_class factor.
enum class ImportClass { none = 0, standard = 1, external = 2 };
std::string_view to_string(ImportClass c);

struct BreakdownPoint {
    std::string id;
    double factor = 0.0;
    double score = 0.0;  // per-example pass@1
};

struct Bin {
    double low = 0.0;   // smallest factor value in the bin
    double high = 0.0;  // largest factor value in the bin
    std::string label;
    std::vector<std::string> ids;
    double mean = 0.0;
};

/// Sorts by (factor, id) and cuts into `bins` consecutive groups whose sizes differ by at
/// most one (earlier groups take the remainder). Throws std::invalid_argument when there are
/// fewer points than bins.
std::vector<Bin> quantile_breakdown(std::vector<BreakdownPoint> points, std::size_t bins = 5);

/// One group per distinct factor value, in ascending order.
std::vector<Bin> categorical_breakdown(std::vector<BreakdownPoint> points);

/// Quantile bins for numeric factors, categorical groups for import_class.
std::vector<Bin> breakdown(Factor factor, std::vector<BreakdownPoint> points);

}  // namespace codebench::analysis

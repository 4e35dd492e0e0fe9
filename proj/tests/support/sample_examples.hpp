#pragma once

#include "codebench/pipeline/example.hpp"
#include "codebench/pipeline/slots.hpp"

#include <string>
#include <vector>

// Small hand-written examples shared by the evaluation and study suites.
namespace codebench::testing::samples {

using pipeline::EvalExample;

inline EvalExample make_example(const std::string& id, const std::string& program, const std::string& fn,
                                std::vector<std::string> tests)
{
    auto split = *pipeline::split_target(program, fn);
    EvalExample ex;
    ex.id = id;
    ex.context = split.context;
    ex.target = split.target;
    ex.function_header = split.header;
    ex.instruction = {"Restricts a value to [low, high].", "value, low, high.", "The clamped value."};
    for (auto& t : tests) ex.test_sets.push_back(pipeline::TestSet{"generated", std::move(t)});
    ex.metadata["function_name"] = fn;
    ex.metadata["qualified_name"] = split.qualified_name;
    ex.metadata["original_docstring"] = "Clamp it.";
    ex.metadata["flags"] = json::array();
    return ex;
}

inline const std::string clamp_program = R"PY(import math

LIMIT = 100

def clamp(value, low, high):
    if value < low:
        return low
    if value > high:
        return high
    return value

def scale(values, factor):
    return [clamp(v * factor, 0, LIMIT) for v in values]
)PY";

inline const std::string clamp_tests = R"PY(def test_clamp():
    assert clamp(5, 0, 10) == 5
    assert clamp(-1, 0, 10) == 0
    assert clamp(11, 0, 10) == 10

test_clamp()
)PY";

inline const std::string clamp_extra = "assert clamp(3, 3, 3) == 3\nassert clamp(8, 1, 4) == 4\nassert clamp(0, 1, 4) == 1\n";

inline const std::string net_program = R"PY(def feed_forward(weights, x):
    return [w * x for w in weights]

class Net:
    def __init__(self, weights):
        self.weights = weights

    def forward(self, x):
        return sum(feed_forward(self.weights, x))
)PY";

inline const std::string net_tests = R"PY(net = Net([1, 2, 3])
assert net.forward(1) == 6
assert net.forward(0) == 0
assert Net([2]).forward(5) == 10
)PY";

}  // namespace codebench::testing::samples

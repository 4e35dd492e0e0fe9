#pragma once

#include "codebench/util/jsonl.hpp"

#include <optional>
#include <string>
#include <vector>

namespace codebench::pipeline {

struct Instruction {
    std::string functionality;
    std::string inputs;
    std::string outputs;

    [[nodiscard]] bool complete() const;
    bool operator==(const Instruction&) const = default;
};

enum class TestOrigin { generated, augmented };

struct TestSet {
    std::string name;
    std::string code;
    TestOrigin origin = TestOrigin::generated;
    std::string model_id;  // augmenting model, empty for generated sets
};

struct StageEvent {
    std::string stage;
    std::string verdict;
    std::string detail;
};

struct Provenance {
    std::string source_id;
    std::vector<StageEvent> log;
};

struct EvalExample {
    std::string id;
    std::string context;  // program with the target replaced by the slot markers
    std::string target;   // full target function, dedented, without decorators
    std::string function_header;
    Instruction instruction;
    std::vector<TestSet> test_sets;
    std::vector<std::string> dependencies;
    Provenance provenance;
    json metadata = json::object();

    [[nodiscard]] std::string function_name() const;
    [[nodiscard]] std::string qualified_name() const;
    [[nodiscard]] bool instruction_degraded() const;
    [[nodiscard]] std::vector<std::string> test_codes() const;
};

json to_json(const Instruction& i);
Instruction instruction_from_json(const json& j);
json to_json(const TestSet& t);
TestSet test_set_from_json(const json& j);
json to_json(const EvalExample& e);
/// Throws std::invalid_argument (or json::exception) on malformed records.
EvalExample example_from_json(const json& j);

std::vector<EvalExample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const std::vector<EvalExample>& examples);

}  // namespace codebench::pipeline

#include "codebench/pipeline/example.hpp"

#include "codebench/util/text.hpp"

#include <fmt/format.h>

namespace codebench::pipeline {

bool Instruction::complete() const
{
    return !text::is_blank(functionality) && !text::is_blank(inputs) && !text::is_blank(outputs);
}

std::string EvalExample::function_name() const
{
    return metadata.value("function_name", std::string{});
}

std::string EvalExample::qualified_name() const
{
    auto q = metadata.value("qualified_name", std::string{});
    return q.empty() ? function_name() : q;
}

bool EvalExample::instruction_degraded() const
{
    if (!metadata.contains("flags")) return false;
    for (const auto& f : metadata["flags"]) {
        if (f == "instruction_degraded") return true;
    }
    return false;
}

std::vector<std::string> EvalExample::test_codes() const
{
    std::vector<std::string> out;
    for (const auto& t : test_sets) out.push_back(t.code);
    return out;
}

json to_json(const Instruction& i)
{
    return {{"functionality", i.functionality}, {"inputs", i.inputs}, {"outputs", i.outputs}};
}

Instruction instruction_from_json(const json& j)
{
    return {j.at("functionality").get<std::string>(), j.at("inputs").get<std::string>(),
            j.at("outputs").get<std::string>()};
}

json to_json(const TestSet& t)
{
    json j = {{"name", t.name}, {"code", t.code}};
    if (t.origin == TestOrigin::generated) {
        j["origin"] = "generated";
    } else {
        j["origin"] = "augmented";
        j["model_id"] = t.model_id;
    }
    return j;
}

TestSet test_set_from_json(const json& j)
{
    TestSet t;
    t.name = j.at("name").get<std::string>();
    t.code = j.at("code").get<std::string>();
    auto origin = j.at("origin").get<std::string>();
    if (origin == "generated") {
        t.origin = TestOrigin::generated;
    } else if (origin == "augmented") {
        t.origin = TestOrigin::augmented;
        t.model_id = j.value("model_id", std::string{});
    } else {
        throw std::invalid_argument("unknown test origin '" + origin + "'");
    }
    return t;
}

json to_json(const EvalExample& e)
{
    json sets = json::array();
    for (const auto& t : e.test_sets) sets.push_back(to_json(t));
    json log = json::array();
    for (const auto& ev : e.provenance.log) {
        log.push_back({{"stage", ev.stage}, {"verdict", ev.verdict}, {"detail", ev.detail}});
    }
    return {
        {"id", e.id},
        {"context", e.context},
        {"target", e.target},
        {"function_header", e.function_header},
        {"instruction", to_json(e.instruction)},
        {"test_sets", sets},
        {"dependencies", e.dependencies},
        {"provenance", {{"source_id", e.provenance.source_id}, {"log", log}}},
        {"metadata", e.metadata},
    };
}

EvalExample example_from_json(const json& j)
{
    EvalExample e;
    e.id = j.at("id").get<std::string>();
    e.context = j.at("context").get<std::string>();
    e.target = j.at("target").get<std::string>();
    e.function_header = j.at("function_header").get<std::string>();
    e.instruction = instruction_from_json(j.at("instruction"));
    for (const auto& t : j.at("test_sets")) e.test_sets.push_back(test_set_from_json(t));
    if (e.test_sets.empty()) throw std::invalid_argument("example " + e.id + " has no test sets");
    e.dependencies = j.at("dependencies").get<std::vector<std::string>>();
    if (j.contains("provenance")) {
        const auto& p = j["provenance"];
        e.provenance.source_id = p.value("source_id", std::string{});
        if (p.contains("log")) {
            for (const auto& ev : p["log"]) {
                e.provenance.log.push_back({ev.value("stage", std::string{}), ev.value("verdict", std::string{}),
                                            ev.value("detail", std::string{})});
            }
        }
    }
    if (j.contains("metadata")) e.metadata = j["metadata"];
    return e;
}

std::vector<EvalExample> load_dataset(const std::filesystem::path& path)
{
    auto read = read_jsonl(path);
    if (read.malformed > 0) {
        throw std::runtime_error(fmt::format("dataset {} has {} unparsable lines", path.string(), read.malformed));
    }
    std::vector<EvalExample> out;
    for (std::size_t i = 0; i < read.records.size(); ++i) {
        try {
            out.push_back(example_from_json(read.records[i]));
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("dataset {} record {}: {}", path.string(), i + 1, e.what()));
        }
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<EvalExample>& examples)
{
    std::vector<json> records;
    for (const auto& e : examples) records.push_back(to_json(e));
    write_jsonl(path, records);
}

}  // namespace codebench::pipeline
